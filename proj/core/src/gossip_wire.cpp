#include "dei/common.hpp"
#include "dei/gossip.hpp"

#include <charconv>
#include <sstream>

namespace dei::gossip {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";
// version, kind, hops, topic len, id len, sender, seq, body len
constexpr std::size_t kFixedBytes = 1 + 1 + 1 + 2 + 2 + 32 + 8 + 4;

void put_u16(std::string& out, std::size_t v) {
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

void put_u32(std::string& out, std::size_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

class Cursor {
public:
    explicit Cursor(std::string_view b) : b_(b) {}

    std::uint64_t uint(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v = (v << 8) | static_cast<unsigned char>(b_[pos_++]);
        return v;
    }
    std::string_view take(std::size_t n) {
        need(n);
        const auto out = b_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t left() const noexcept { return b_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw WireError("truncated frame");
    }
    std::string_view b_;
    std::size_t pos_ = 0;
};

}  // namespace

// --- PeerId ----------------------------------------------------------------

bool PeerId::valid_hex(std::string_view hex) noexcept {
    if (hex.size() != 64) return false;
    for (char c : hex) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
}

PeerId PeerId::from_hex(std::string_view hex) {
    if (!valid_hex(hex)) {
        throw PreconditionError("peer id must be 64 lowercase hex characters, got '" + std::string(hex) + "'");
    }
    PeerId p;
    for (std::size_t i = 0; i < 32; ++i) {
        unsigned v = 0;
        std::from_chars(hex.data() + 2 * i, hex.data() + 2 * i + 2, v, 16);
        p.bytes[i] = static_cast<std::uint8_t>(v);
    }
    return p;
}

PeerId PeerId::random(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    PeerId p;
    for (std::size_t i = 0; i < 32; i += 8) {
        const std::uint64_t v = rng();
        for (std::size_t k = 0; k < 8; ++k) p.bytes[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
    }
    return p;
}

std::string PeerId::hex() const {
    std::string out(64, '0');
    for (std::size_t i = 0; i < 32; ++i) {
        out[2 * i] = kHexDigits[bytes[i] >> 4];
        out[2 * i + 1] = kHexDigits[bytes[i] & 0xf];
    }
    return out;
}

// --- Frames ----------------------------------------------------------------

std::string_view to_string(FrameKind k) {
    switch (k) {
        case FrameKind::Publish: return "PUBLISH";
        case FrameKind::IHave: return "IHAVE";
        case FrameKind::IWant: return "IWANT";
        case FrameKind::Graft: return "GRAFT";
        case FrameKind::Prune: return "PRUNE";
    }
    return "?";
}

std::string encode_frame(const Frame& f) {
    if (f.topic.size() > 0xffff) throw PreconditionError("topic longer than 65535 bytes");
    if (f.msg_id.size() > 0xffff) throw PreconditionError("message id longer than 65535 bytes");
    const std::size_t len = kFixedBytes + f.topic.size() + f.msg_id.size() + f.body.size();
    if (len > kMaxFrameBytes) throw PreconditionError("frame exceeds " + std::to_string(kMaxFrameBytes) + " bytes");

    std::string out;
    out.reserve(4 + len);
    put_u32(out, len);
    out.push_back(static_cast<char>(kWireVersion));
    out.push_back(static_cast<char>(f.kind));
    out.push_back(static_cast<char>(f.hops));
    put_u16(out, f.topic.size());
    out += f.topic;
    put_u16(out, f.msg_id.size());
    out += f.msg_id;
    out.append(reinterpret_cast<const char*>(f.sender.bytes.data()), f.sender.bytes.size());
    put_u64(out, f.seq);
    put_u32(out, f.body.size());
    out += f.body;
    return out;
}

Frame decode_frame(std::string_view bytes) {
    Cursor c(bytes);
    const std::size_t len = c.uint(4);
    if (len > kMaxFrameBytes) throw WireError("frame length " + std::to_string(len) + " over limit");
    if (len != c.left()) throw WireError("frame length prefix does not match payload");
    const auto version = static_cast<std::uint8_t>(c.uint(1));
    if (version != kWireVersion) throw WireError("unsupported wire version " + std::to_string(version));
    const auto kind = static_cast<std::uint8_t>(c.uint(1));
    if (kind < 1 || kind > 5) throw WireError("unknown frame kind " + std::to_string(kind));

    Frame f;
    f.kind = static_cast<FrameKind>(kind);
    f.hops = static_cast<std::uint8_t>(c.uint(1));
    f.topic = std::string(c.take(c.uint(2)));
    f.msg_id = std::string(c.take(c.uint(2)));
    const auto sender = c.take(32);
    std::copy(sender.begin(), sender.end(), f.sender.bytes.begin());
    f.seq = c.uint(8);
    f.body = std::string(c.take(c.uint(4)));
    if (c.left() != 0) throw WireError("trailing bytes after frame body");
    return f;
}

std::string encode_id_list(const std::vector<std::string>& ids) {
    if (ids.size() > 0xffff) throw PreconditionError("too many ids in one control frame");
    std::string out;
    put_u16(out, ids.size());
    for (const auto& id : ids) {
        if (id.size() > 0xffff) throw PreconditionError("message id too long");
        put_u16(out, id.size());
        out += id;
    }
    return out;
}

std::vector<std::string> decode_id_list(std::string_view body) {
    Cursor c(body);
    const std::size_t n = c.uint(2);
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids.emplace_back(c.take(c.uint(2)));
    if (c.left() != 0) throw WireError("trailing bytes after id list");
    return ids;
}

std::optional<std::string> FrameReader::next() {
    if (buf_.size() < 4) return std::nullopt;
    std::size_t len = 0;
    for (int i = 0; i < 4; ++i) len = (len << 8) | static_cast<unsigned char>(buf_[i]);
    if (len > kMaxFrameBytes) throw WireError("frame length " + std::to_string(len) + " over limit");
    if (buf_.size() < 4 + len) return std::nullopt;
    std::string frame = buf_.substr(0, 4 + len);
    buf_.erase(0, 4 + len);
    return frame;
}

std::string make_message_id(std::string_view payload, const PeerId& sender, std::uint64_t seq) {
    return to_hex(fnv1a(payload)) + ":" + sender.hex() + ":" + std::to_string(seq);
}

// --- Peers file ------------------------------------------------------------

std::vector<PeerAddress> parse_peers_file(std::string_view text) {
    std::vector<PeerAddress> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string line(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream in(line);
        std::string id, addr, extra;
        if (!(in >> id)) continue;
        const std::string where = "peers file line " + std::to_string(line_no);
        if (!(in >> addr) || (in >> extra)) throw PreconditionError(where + ": expected 'peer_id host:port'");
        const auto colon = addr.rfind(':');
        if (colon == std::string::npos || colon == 0) throw PreconditionError(where + ": bad address " + addr);
        PeerAddress p;
        p.id = PeerId::from_hex(id);
        p.host = addr.substr(0, colon);
        if (p.host.size() > 2 && p.host.front() == '[' && p.host.back() == ']') p.host = p.host.substr(1, p.host.size() - 2);
        const auto port_s = addr.substr(colon + 1);
        const auto [ptr, ec] = std::from_chars(port_s.data(), port_s.data() + port_s.size(), p.port);
        if (ec != std::errc() || ptr != port_s.data() + port_s.size() || p.port <= 0 || p.port > 65535) {
            throw PreconditionError(where + ": bad port " + port_s);
        }
        out.push_back(std::move(p));
        if (end == text.size()) break;
    }
    return out;
}

}  // namespace dei::gossip
