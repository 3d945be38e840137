#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>

#include "feddag/federation.hpp"

namespace feddag {

// Bounded FIFO byte-frame queue; one producer, one consumer. pop blocks
// until a frame arrives, the queue closes, or the deadline passes.
class FrameQueue {
  public:
    explicit FrameQueue(std::size_t capacity = 8) : capacity_(capacity) {}

    void push(std::vector<std::uint8_t> frame);
    std::optional<std::vector<std::uint8_t>> pop(std::chrono::milliseconds timeout);
    void close();

  private:
    std::size_t capacity_;
    std::deque<std::vector<std::uint8_t>> frames_;
    bool closed_ = false;
    std::mutex mutex_;
    std::condition_variable cv_;
};

// Threads-in-one-process transport. Frames are still serialized so every
// transport moves identical bytes.
class InProcTransport : public FederationTransport {
  public:
    explicit InProcTransport(std::vector<std::string> site_ids,
                             std::chrono::milliseconds gather_timeout = std::chrono::minutes(2));
    ~InProcTransport() override;

    const std::vector<std::string>& site_ids() const override { return site_ids_; }
    void broadcast(std::uint32_t round, const std::vector<BroadcastPayload>& payloads) override;
    std::vector<RoundMessage> gather(std::uint32_t round) override;
    void terminate() override;

    // Channel for site worker k; owned by the transport, valid for its
    // lifetime.
    SiteChannel& site_channel(int site_index);

  private:
    struct Lane;
    std::vector<std::string> site_ids_;
    std::vector<std::unique_ptr<Lane>> lanes_;
    std::chrono::milliseconds gather_timeout_;
};

// Frame-per-file exchange over a shared directory. Files are named
// round_{t}_{site}_{direction}.fdag and written atomically via rename.
class FileTransport : public FederationTransport {
  public:
    FileTransport(std::filesystem::path dir, std::vector<std::string> site_ids,
                  std::chrono::milliseconds gather_timeout = std::chrono::seconds(30));

    const std::vector<std::string>& site_ids() const override { return site_ids_; }
    void broadcast(std::uint32_t round, const std::vector<BroadcastPayload>& payloads) override;
    std::vector<RoundMessage> gather(std::uint32_t round) override;
    void terminate() override;

  private:
    std::filesystem::path dir_;
    std::vector<std::string> site_ids_;
    std::chrono::milliseconds gather_timeout_;
};

class FileSiteChannel : public SiteChannel {
  public:
    FileSiteChannel(std::filesystem::path dir, std::string site_id,
                    std::chrono::milliseconds receive_timeout = std::chrono::seconds(30));

    Downlink receive() override;
    void send(std::uint32_t round, const Matrix& w) override;

  private:
    std::filesystem::path dir_;
    std::string site_id_;
    std::chrono::milliseconds receive_timeout_;
    std::uint64_t downlink_serial_ = 0;
};

// Length-prefixed frames over TCP. The center listens, sites connect and
// register, then rounds proceed in lockstep.
class TcpTransport : public FederationTransport {
  public:
    // bind_addr is "host:port"; port 0 picks an ephemeral port.
    TcpTransport(const std::string& bind_addr, std::vector<std::string> site_ids,
                 std::chrono::milliseconds gather_timeout = std::chrono::seconds(30));
    ~TcpTransport() override;

    // Blocks until every expected site has connected and registered.
    void accept_sites();
    std::uint16_t port() const { return port_; }

    const std::vector<std::string>& site_ids() const override { return site_ids_; }
    void broadcast(std::uint32_t round, const std::vector<BroadcastPayload>& payloads) override;
    std::vector<RoundMessage> gather(std::uint32_t round) override;
    void terminate() override;

  private:
    std::vector<std::string> site_ids_;
    std::vector<int> site_fds_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::chrono::milliseconds gather_timeout_;
};

class TcpSiteChannel : public SiteChannel {
  public:
    TcpSiteChannel(const std::string& center_addr, std::string site_id,
                   std::chrono::milliseconds receive_timeout = std::chrono::minutes(5));
    ~TcpSiteChannel() override;

    Downlink receive() override;
    void send(std::uint32_t round, const Matrix& w) override;

  private:
    std::string site_id_;
    int fd_ = -1;
    std::chrono::milliseconds receive_timeout_;
};

// Default center address when FEDDAG_BIND_ADDR is unset.
std::string default_bind_addr();

}  // namespace feddag
