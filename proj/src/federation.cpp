#include "feddag/federation.hpp"

#include <array>
#include <cstring>
#include <sstream>

#include "feddag/local_solver.hpp"

namespace feddag {

namespace {

struct Writer {
    std::vector<std::uint8_t> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) {
        bytes.push_back(static_cast<std::uint8_t>(v));
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        u64(u);
    }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes.insert(bytes.end(), p, p + n);
    }
};

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    std::size_t remaining() const { return bytes.size() - pos; }
    void need(std::size_t n) const {
        if (pos + n > bytes.size()) throw ProtocolViolation("frame truncated");
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(bytes[pos]) |
                          static_cast<std::uint16_t>(bytes[pos + 1]) << 8;
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t u = u64();
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
};

constexpr std::array<std::uint8_t, 4> kMagic = {'F', 'D', 'A', 'G'};

void write_matrix_block(Writer& w, const Matrix& m) {
    const std::size_t start = w.bytes.size();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
    const std::uint32_t crc =
        crc32(std::span(w.bytes).subspan(start, w.bytes.size() - start));
    w.u32(crc);
}

Matrix read_matrix_block(Reader& r, std::uint32_t dim) {
    const std::size_t n_bytes = static_cast<std::size_t>(dim) * dim * 8;
    r.need(n_bytes + 4);
    const auto block = r.bytes.subspan(r.pos, n_bytes);
    Matrix m(dim, dim);
    for (std::uint32_t i = 0; i < dim; ++i)
        for (std::uint32_t j = 0; j < dim; ++j) m(i, j) = r.f64();
    const std::uint32_t expected = r.u32();
    if (crc32(block) != expected) throw ChecksumMismatch("frame payload CRC mismatch");
    return m;
}

void write_header(Writer& w, std::uint16_t version, std::uint32_t round, Direction direction,
                  const std::string& site_id, std::uint32_t dim) {
    w.raw(kMagic.data(), kMagic.size());
    w.u16(version);
    w.u32(round);
    w.u8(static_cast<std::uint8_t>(direction));
    w.u16(static_cast<std::uint16_t>(site_id.size()));
    w.raw(site_id.data(), site_id.size());
    w.u32(dim);
}

std::vector<std::uint8_t> finish_frame(Writer&& body) {
    Writer framed;
    framed.u64(body.bytes.size());
    framed.bytes.insert(framed.bytes.end(), body.bytes.begin(), body.bytes.end());
    return std::move(framed.bytes);
}

struct ParsedFrame {
    RoundMessage msg;
    Reader reader;  // positioned after the first matrix block
};

ParsedFrame parse_base(std::span<const std::uint8_t> bytes) {
    Reader r{bytes};
    const std::uint64_t length = r.u64();
    if (length != bytes.size() - 8) throw ProtocolViolation("frame length mismatch");
    for (auto m : kMagic)
        if (r.u8() != m) throw ProtocolViolation("bad frame magic");

    RoundMessage msg;
    msg.protocol_version = r.u16();
    msg.round = r.u32();
    const std::uint8_t dir = r.u8();
    if (dir > 1) throw ProtocolViolation("bad direction byte");
    msg.direction = static_cast<Direction>(dir);
    const std::uint16_t id_len = r.u16();
    r.need(id_len);
    msg.site_id.assign(reinterpret_cast<const char*>(bytes.data()) + r.pos, id_len);
    r.pos += id_len;
    msg.dim = r.u32();
    msg.payload = read_matrix_block(r, msg.dim);
    return ParsedFrame{std::move(msg), r};
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::uint8_t b : bytes) crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

std::vector<std::uint8_t> serialize(const RoundMessage& msg) {
    if (msg.payload.rows() != msg.dim || msg.payload.cols() != msg.dim)
        throw ShapeMismatch("serialize: payload does not match dim");
    Writer w;
    write_header(w, msg.protocol_version, msg.round, msg.direction, msg.site_id, msg.dim);
    write_matrix_block(w, msg.payload);
    return finish_frame(std::move(w));
}

RoundMessage deserialize(std::span<const std::uint8_t> bytes) {
    ParsedFrame parsed = parse_base(bytes);
    if (parsed.reader.remaining() != 0) throw ProtocolViolation("unexpected trailing bytes");
    return std::move(parsed.msg);
}

std::vector<std::uint8_t> serialize_broadcast(std::uint32_t round, const std::string& site_id,
                                              const BroadcastPayload& payload) {
    const auto dim = static_cast<std::uint32_t>(payload.z.rows());
    if (payload.beta.rows() != payload.z.rows() || payload.beta.cols() != payload.z.cols())
        throw ShapeMismatch("serialize_broadcast: beta/z shape mismatch");
    Writer w;
    write_header(w, kProtocolVersion, round, Direction::CenterToSite, site_id, dim);
    write_matrix_block(w, payload.z);
    write_matrix_block(w, payload.beta);
    w.f64(payload.rho2);
    return finish_frame(std::move(w));
}

std::vector<std::uint8_t> serialize_terminate(const std::string& site_id) {
    RoundMessage msg;
    msg.round = kTerminateRound;
    msg.direction = Direction::CenterToSite;
    msg.site_id = site_id;
    msg.dim = 0;
    msg.payload = Matrix(0, 0);
    return serialize(msg);
}

Downlink deserialize_downlink(std::span<const std::uint8_t> bytes,
                              const std::string& expected_site_id) {
    ParsedFrame parsed = parse_base(bytes);
    RoundMessage& msg = parsed.msg;
    if (msg.direction != Direction::CenterToSite)
        throw ProtocolViolation("downlink frame has wrong direction");
    if (!expected_site_id.empty() && msg.site_id != expected_site_id)
        throw ProtocolViolation("downlink frame addressed to '" + msg.site_id + "', expected '" +
                                expected_site_id + "'");

    Downlink down;
    down.round = msg.round;
    if (msg.round == kTerminateRound) {
        down.terminate = true;
        return down;
    }
    down.payload.z = std::move(msg.payload);
    if (parsed.reader.remaining() == 0) {
        // Plain frame: dual defaults to zero, rho2 to 1.
        down.payload.beta = Matrix::Zero(msg.dim, msg.dim);
        down.payload.rho2 = 1.0;
        return down;
    }
    down.payload.beta = read_matrix_block(parsed.reader, msg.dim);
    down.payload.rho2 = parsed.reader.f64();
    if (parsed.reader.remaining() != 0) throw ProtocolViolation("unexpected trailing bytes");
    return down;
}

void run_site_worker(const SiteDataset& dataset, SiteChannel& channel) {
    LocalSolver solver(dataset.gram());
    std::int64_t last_round = -1;
    for (;;) {
        Downlink down = channel.receive();
        if (down.terminate) return;
        if (static_cast<std::int64_t>(down.round) <= last_round) {
            std::ostringstream os;
            os << "site '" << dataset.site_id() << "': round " << down.round
               << " not after round " << last_round;
            throw ProtocolViolation(os.str());
        }
        last_round = down.round;
        const WeightedAdjacency w =
            solver.solve(down.payload.z, down.payload.beta, down.payload.rho2);
        channel.send(down.round, w.values());
    }
}

}  // namespace feddag
