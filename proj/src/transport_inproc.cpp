#include "feddag/transports.hpp"

namespace feddag {

void FrameQueue::push(std::vector<std::uint8_t> frame) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return frames_.size() < capacity_ || closed_; });
    if (closed_) throw TransportFailure("frame queue closed");
    frames_.push_back(std::move(frame));
    cv_.notify_all();
}

std::optional<std::vector<std::uint8_t>> FrameQueue::pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_for(lock, timeout, [this] { return !frames_.empty() || closed_; }))
        return std::nullopt;
    if (frames_.empty()) return std::nullopt;  // closed and drained
    auto frame = std::move(frames_.front());
    frames_.pop_front();
    cv_.notify_all();
    return frame;
}

void FrameQueue::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    cv_.notify_all();
}

struct InProcTransport::Lane {
    explicit Lane(std::string id) : site_id(std::move(id)), channel(this) {}

    std::string site_id;
    FrameQueue down;
    FrameQueue up;

    struct Channel : SiteChannel {
        explicit Channel(Lane* lane) : lane_(lane) {}

        Downlink receive() override {
            auto frame = lane_->down.pop(std::chrono::minutes(10));
            if (!frame)
                throw TransportFailure("site '" + lane_->site_id + "': downlink closed");
            return deserialize_downlink(*frame, lane_->site_id);
        }

        void send(std::uint32_t round, const Matrix& w) override {
            RoundMessage msg;
            msg.round = round;
            msg.direction = Direction::SiteToCenter;
            msg.site_id = lane_->site_id;
            msg.dim = static_cast<std::uint32_t>(w.rows());
            msg.payload = w;
            lane_->up.push(serialize(msg));
        }

        Lane* lane_;
    } channel;
};

InProcTransport::InProcTransport(std::vector<std::string> site_ids,
                                 std::chrono::milliseconds gather_timeout)
    : site_ids_(std::move(site_ids)), gather_timeout_(gather_timeout) {
    for (const auto& id : site_ids_) lanes_.push_back(std::make_unique<Lane>(id));
}

InProcTransport::~InProcTransport() {
    for (auto& lane : lanes_) {
        lane->down.close();
        lane->up.close();
    }
}

SiteChannel& InProcTransport::site_channel(int site_index) {
    if (site_index < 0 || site_index >= static_cast<int>(lanes_.size()))
        throw IndexOutOfRange("InProcTransport: bad site index");
    return lanes_[static_cast<std::size_t>(site_index)]->channel;
}

void InProcTransport::broadcast(std::uint32_t round,
                                const std::vector<BroadcastPayload>& payloads) {
    if (payloads.size() != lanes_.size())
        throw ShapeMismatch("broadcast: payload count != site count");
    for (std::size_t k = 0; k < lanes_.size(); ++k) {
        auto frame = serialize_broadcast(round, site_ids_[k], payloads[k]);
        observe(frame);
        lanes_[k]->down.push(std::move(frame));
    }
}

std::vector<RoundMessage> InProcTransport::gather(std::uint32_t round) {
    std::vector<RoundMessage> out;
    out.reserve(lanes_.size());
    for (std::size_t k = 0; k < lanes_.size(); ++k) {
        auto frame = lanes_[k]->up.pop(gather_timeout_);
        if (!frame)
            throw TransportFailure("gather: site '" + site_ids_[k] + "' did not reply");
        observe(*frame);
        RoundMessage msg = deserialize(*frame);
        if (msg.round != round || msg.site_id != site_ids_[k] ||
            msg.direction != Direction::SiteToCenter)
            throw ProtocolViolation("gather: unexpected frame from site '" + msg.site_id + "'");
        out.push_back(std::move(msg));
    }
    return out;
}

void InProcTransport::terminate() {
    for (std::size_t k = 0; k < lanes_.size(); ++k) {
        auto frame = serialize_terminate(site_ids_[k]);
        observe(frame);
        lanes_[k]->down.push(std::move(frame));
    }
}

}  // namespace feddag
