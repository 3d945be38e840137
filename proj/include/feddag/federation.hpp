#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "feddag/types.hpp"

namespace feddag {

constexpr std::uint16_t kProtocolVersion = 1;
constexpr std::uint32_t kTerminateRound = 0xFFFFFFFFu;

enum class Direction : std::uint8_t { SiteToCenter = 0, CenterToSite = 1 };

// One matrix in flight between a site and the center. W^k travels upstream,
// Z^k downstream; raw observations never do.
struct RoundMessage {
    std::uint16_t protocol_version = kProtocolVersion;
    std::uint32_t round = 0;
    Direction direction = Direction::SiteToCenter;
    std::string site_id;
    std::uint32_t dim = 0;
    Matrix payload;  // dim x dim, row-major on the wire
};

// CRC-32 (IEEE 802.3, reflected 0xEDB88320).
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Frame layout: u64 length of everything that follows, magic "FDAG",
// u16 version, u32 round, u8 direction, u16 site-id length + UTF-8 bytes,
// u32 dim, dim^2 little-endian doubles row-major, u32 CRC32 of the double
// block. Broadcast frames append a second matrix block (same encoding) and
// one double; see serialize_broadcast.
std::vector<std::uint8_t> serialize(const RoundMessage& msg);
RoundMessage deserialize(std::span<const std::uint8_t> bytes);

// Downlink state for one site in one round. The equality dual and rho2
// ride along with Z so sites stay stateless between rounds.
struct BroadcastPayload {
    Matrix z;
    Matrix beta;
    double rho2 = 1.0;
};

struct Downlink {
    std::uint32_t round = 0;
    bool terminate = false;
    BroadcastPayload payload;
};

std::vector<std::uint8_t> serialize_broadcast(std::uint32_t round, const std::string& site_id,
                                              const BroadcastPayload& payload);
std::vector<std::uint8_t> serialize_terminate(const std::string& site_id);
Downlink deserialize_downlink(std::span<const std::uint8_t> bytes,
                              const std::string& expected_site_id);

using FrameObserver = std::function<void(std::span<const std::uint8_t>)>;

// Center-side endpoint: one broadcast + one gather per round, with the
// gather acting as the round barrier.
class FederationTransport {
  public:
    virtual ~FederationTransport() = default;

    virtual const std::vector<std::string>& site_ids() const = 0;
    int site_count() const { return static_cast<int>(site_ids().size()); }

    virtual void broadcast(std::uint32_t round, const std::vector<BroadcastPayload>& payloads) = 0;
    // Exactly one message per registered site, in site order.
    virtual std::vector<RoundMessage> gather(std::uint32_t round) = 0;
    virtual void terminate() = 0;

    void set_frame_observer(FrameObserver observer) { observer_ = std::move(observer); }

  protected:
    void observe(std::span<const std::uint8_t> frame) const {
        if (observer_) observer_(frame);
    }

  private:
    FrameObserver observer_;
};

// Site-side endpoint for one worker.
class SiteChannel {
  public:
    virtual ~SiteChannel() = default;
    virtual Downlink receive() = 0;
    virtual void send(std::uint32_t round, const Matrix& w) = 0;
};

// Site worker loop: receive (Z, beta, rho2), run the closed-form local
// update, reply with W. Returns on a terminate frame; raises
// ProtocolViolation on out-of-order rounds.
void run_site_worker(const SiteDataset& dataset, SiteChannel& channel);

}  // namespace feddag
