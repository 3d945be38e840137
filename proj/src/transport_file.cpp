#include <fstream>
#include <thread>

#include "feddag/transports.hpp"

namespace feddag {

namespace {

namespace fs = std::filesystem;

std::string frame_name(std::uint32_t round, const std::string& site_id, Direction dir) {
    return "round_" + std::to_string(round) + "_" + site_id + "_" +
           (dir == Direction::CenterToSite ? "c2s" : "s2c") + ".fdag";
}

void write_frame_file(const fs::path& dir, const std::string& name,
                      std::span<const std::uint8_t> frame) {
    const fs::path tmp = dir / (name + ".tmp");
    const fs::path final_path = dir / name;
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw TransportFailure("cannot write frame file " + tmp.string());
        out.write(reinterpret_cast<const char*>(frame.data()),
                  static_cast<std::streamsize>(frame.size()));
    }
    fs::rename(tmp, final_path);  // atomic publish
}

std::vector<std::uint8_t> wait_read_frame(const fs::path& dir, const std::string& name,
                                          std::chrono::milliseconds timeout,
                                          const std::string& who) {
    const fs::path path = dir / name;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (!fs::exists(path)) {
        if (std::chrono::steady_clock::now() > deadline)
            throw TransportFailure(who + ": timed out waiting for " + name);
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    std::ifstream in(path, std::ios::binary);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    fs::remove(path);
    return bytes;
}

}  // namespace

FileTransport::FileTransport(std::filesystem::path dir, std::vector<std::string> site_ids,
                             std::chrono::milliseconds gather_timeout)
    : dir_(std::move(dir)), site_ids_(std::move(site_ids)), gather_timeout_(gather_timeout) {
    fs::create_directories(dir_);
}

void FileTransport::broadcast(std::uint32_t round,
                              const std::vector<BroadcastPayload>& payloads) {
    if (payloads.size() != site_ids_.size())
        throw ShapeMismatch("broadcast: payload count != site count");
    for (std::size_t k = 0; k < site_ids_.size(); ++k) {
        auto frame = serialize_broadcast(round, site_ids_[k], payloads[k]);
        observe(frame);
        write_frame_file(dir_, frame_name(round, site_ids_[k], Direction::CenterToSite), frame);
    }
}

std::vector<RoundMessage> FileTransport::gather(std::uint32_t round) {
    std::vector<RoundMessage> out;
    out.reserve(site_ids_.size());
    for (const auto& id : site_ids_) {
        auto frame = wait_read_frame(dir_, frame_name(round, id, Direction::SiteToCenter),
                                     gather_timeout_, "gather");
        observe(frame);
        RoundMessage msg = deserialize(frame);
        if (msg.round != round || msg.site_id != id ||
            msg.direction != Direction::SiteToCenter)
            throw ProtocolViolation("gather: unexpected frame from site '" + msg.site_id + "'");
        out.push_back(std::move(msg));
    }
    return out;
}

void FileTransport::terminate() {
    for (const auto& id : site_ids_) {
        auto frame = serialize_terminate(id);
        observe(frame);
        write_frame_file(dir_, frame_name(kTerminateRound, id, Direction::CenterToSite), frame);
    }
}

FileSiteChannel::FileSiteChannel(std::filesystem::path dir, std::string site_id,
                                 std::chrono::milliseconds receive_timeout)
    : dir_(std::move(dir)), site_id_(std::move(site_id)), receive_timeout_(receive_timeout) {
    fs::create_directories(dir_);
}

Downlink FileSiteChannel::receive() {
    // Downlinks arrive in round order; rounds are strictly increasing, so
    // poll for the next expected round or the terminate frame.
    const auto deadline = std::chrono::steady_clock::now() + receive_timeout_;
    for (;;) {
        const std::string term = frame_name(kTerminateRound, site_id_, Direction::CenterToSite);
        if (fs::exists(dir_ / term)) {
            auto frame = wait_read_frame(dir_, term, receive_timeout_, "site " + site_id_);
            return deserialize_downlink(frame, site_id_);
        }
        const std::string next =
            frame_name(static_cast<std::uint32_t>(downlink_serial_ + 1), site_id_,
                       Direction::CenterToSite);
        if (fs::exists(dir_ / next)) {
            auto frame = wait_read_frame(dir_, next, receive_timeout_, "site " + site_id_);
            ++downlink_serial_;
            return deserialize_downlink(frame, site_id_);
        }
        if (std::chrono::steady_clock::now() > deadline)
            throw TransportFailure("site '" + site_id_ + "': no downlink within timeout");
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

void FileSiteChannel::send(std::uint32_t round, const Matrix& w) {
    RoundMessage msg;
    msg.round = round;
    msg.direction = Direction::SiteToCenter;
    msg.site_id = site_id_;
    msg.dim = static_cast<std::uint32_t>(w.rows());
    msg.payload = w;
    write_frame_file(dir_, frame_name(round, site_id_, Direction::SiteToCenter),
                     serialize(msg));
}

}  // namespace feddag
