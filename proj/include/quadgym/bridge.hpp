#pragma once

// Framed request/response protocol over a Unix-domain stream socket.
//
// Every frame is  u32 length | u8 type | payload[length - 1]  with all
// integers and floats little-endian. See docs/protocol.md for the payloads.

#include "quadgym/config.hpp"
#include "quadgym/vec_env.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace quadgym::bridge {

inline constexpr std::uint32_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

enum class FrameType : std::uint8_t {
    Hello = 1,
    Reset = 2,
    Step = 3,
    StepResult = 4,
    Obs = 5,
    Error = 6,
    Close = 7,
};

enum class ErrorCode : std::uint16_t {
    BadVersion = 1,
    ShapeMismatch = 2,
    Malformed = 3,
    NotReady = 4,
    UnknownType = 5,
    TooLarge = 6,
    Internal = 7,
};

struct Frame {
    FrameType type = FrameType::Close;
    std::vector<std::uint8_t> payload;
};

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(ErrorCode c, const std::string& what) : std::runtime_error(what), code(c) {}
    ErrorCode code;
};

// --- little-endian encoding ------------------------------------------------------------

class Writer {
public:
    template <class T>
    void put(T v) {
        if constexpr (std::is_same_v<T, float>) put_uint(std::bit_cast<std::uint32_t>(v), 4);
        else if constexpr (std::is_same_v<T, double>) put_uint(std::bit_cast<std::uint64_t>(v), 8);
        else put_uint(static_cast<std::uint64_t>(v), sizeof(T));
    }
    void put_bytes(const std::string& s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t> bytes;

private:
    void put_uint(std::uint64_t v, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

    template <class T>
    T get() {
        if constexpr (std::is_same_v<T, float>) return std::bit_cast<float>(static_cast<std::uint32_t>(get_uint(4)));
        else if constexpr (std::is_same_v<T, double>) return std::bit_cast<double>(get_uint(8));
        else return static_cast<T>(get_uint(sizeof(T)));
    }
    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return b_.size() - pos_; }
    void expect_end() const {
        if (remaining() != 0) throw ProtocolError(ErrorCode::Malformed, "trailing bytes in payload");
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw ProtocolError(ErrorCode::Malformed, "payload is truncated");
    }
    std::uint64_t get_uint(std::size_t n) {
        need(n);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
        pos_ += n;
        return v;
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

// --- socket I/O --------------------------------------------------------------------------

namespace detail {

inline bool write_all(int fd, const std::uint8_t* p, std::size_t n) {
    while (n > 0) {
        const ssize_t k = ::send(fd, p, n, MSG_NOSIGNAL);
        if (k < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        p += k;
        n -= static_cast<std::size_t>(k);
    }
    return true;
}

/// false on EOF or error before `n` bytes arrived.
inline bool read_all(int fd, std::uint8_t* p, std::size_t n) {
    while (n > 0) {
        const ssize_t k = ::recv(fd, p, n, 0);
        if (k == 0) return false;
        if (k < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        p += k;
        n -= static_cast<std::size_t>(k);
    }
    return true;
}

inline sockaddr_un unix_address(const std::string& path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof(addr.sun_path)) throw std::invalid_argument("socket path is too long: " + path);
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    return addr;
}

}  // namespace detail

inline bool send_frame(int fd, FrameType type, const std::vector<std::uint8_t>& payload) {
    Writer w;
    w.put(static_cast<std::uint32_t>(payload.size() + 1));
    w.put(static_cast<std::uint8_t>(type));
    w.bytes.insert(w.bytes.end(), payload.begin(), payload.end());
    return detail::write_all(fd, w.bytes.data(), w.bytes.size());
}

enum class ReadStatus { Ok, Closed, TooLarge, Empty };

/// Reads one frame. A connection closed mid-frame reports Closed.
inline ReadStatus recv_frame(int fd, Frame& out, std::uint32_t max_bytes = kMaxFrameBytes) {
    std::uint8_t hdr[4];
    if (!detail::read_all(fd, hdr, 4)) return ReadStatus::Closed;
    const std::uint32_t len = static_cast<std::uint32_t>(hdr[0]) | static_cast<std::uint32_t>(hdr[1]) << 8 |
                              static_cast<std::uint32_t>(hdr[2]) << 16 | static_cast<std::uint32_t>(hdr[3]) << 24;
    if (len == 0) return ReadStatus::Empty;
    if (len > max_bytes) return ReadStatus::TooLarge;
    std::uint8_t type = 0;
    if (!detail::read_all(fd, &type, 1)) return ReadStatus::Closed;
    out.type = static_cast<FrameType>(type);
    out.payload.resize(len - 1);
    if (len > 1 && !detail::read_all(fd, out.payload.data(), len - 1)) return ReadStatus::Closed;
    return ReadStatus::Ok;
}

inline std::vector<std::uint8_t> error_payload(ErrorCode code, const std::string& msg) {
    Writer w;
    w.put(static_cast<std::uint16_t>(code));
    w.put(static_cast<std::uint32_t>(msg.size()));
    w.put_bytes(msg);
    return w.bytes;
}

// --- messages ------------------------------------------------------------------------------

struct Hello {
    std::uint32_t version = kProtocolVersion;
    std::uint64_t config_hash = 0;
    std::uint32_t n_envs = 0;
    std::uint32_t obs_dim = 0;
    std::uint32_t act_dim = 0;

    std::vector<std::uint8_t> encode() const {
        Writer w;
        w.put(version);
        w.put(config_hash);
        w.put(n_envs);
        w.put(obs_dim);
        w.put(act_dim);
        return w.bytes;
    }
    static Hello decode(const std::vector<std::uint8_t>& b) {
        Reader r(b);
        Hello h;
        h.version = r.get<std::uint32_t>();
        h.config_hash = r.get<std::uint64_t>();
        h.n_envs = r.get<std::uint32_t>();
        h.obs_dim = r.get<std::uint32_t>();
        h.act_dim = r.get<std::uint32_t>();
        r.expect_end();
        return h;
    }
};

/// Wire form of one batched step: float32 observations, float64 rewards.
struct StepReply {
    std::uint32_t n_envs = 0;
    std::uint32_t obs_dim = 0;
    std::vector<float> obs;
    std::vector<double> reward;
    std::vector<std::uint8_t> done;
    std::vector<std::uint8_t> outcome;
    std::vector<std::uint32_t> step;
    std::vector<std::uint64_t> episode;

    static StepReply from(const StepResult& r) {
        StepReply s;
        s.n_envs = static_cast<std::uint32_t>(r.reward.size());
        s.obs_dim = static_cast<std::uint32_t>(r.obs_dim);
        s.obs.assign(r.obs.begin(), r.obs.end());
        s.reward = r.reward;
        s.done = r.done;
        for (const auto& i : r.info) {
            s.outcome.push_back(static_cast<std::uint8_t>(i.outcome));
            s.step.push_back(static_cast<std::uint32_t>(i.step));
            s.episode.push_back(i.episode);
        }
        return s;
    }

    std::vector<std::uint8_t> encode() const {
        Writer w;
        w.put(n_envs);
        w.put(obs_dim);
        for (float v : obs) w.put(v);
        for (double v : reward) w.put(v);
        for (auto v : done) w.put(v);
        for (std::size_t i = 0; i < n_envs; ++i) {
            w.put(outcome[i]);
            w.put(step[i]);
            w.put(episode[i]);
        }
        return w.bytes;
    }

    static StepReply decode(const std::vector<std::uint8_t>& b) {
        Reader r(b);
        StepReply s;
        s.n_envs = r.get<std::uint32_t>();
        s.obs_dim = r.get<std::uint32_t>();
        const std::size_t n = s.n_envs;
        const std::size_t per_env = 4ull * s.obs_dim + 8 + 1 + 1 + 4 + 8;
        if (n != 0 && r.remaining() / n < per_env) throw ProtocolError(ErrorCode::Malformed, "step reply is truncated");
        s.obs.resize(n * s.obs_dim);
        for (auto& v : s.obs) v = r.get<float>();
        s.reward.resize(n);
        for (auto& v : s.reward) v = r.get<double>();
        s.done.resize(n);
        for (auto& v : s.done) v = r.get<std::uint8_t>();
        for (std::size_t i = 0; i < n; ++i) {
            s.outcome.push_back(r.get<std::uint8_t>());
            s.step.push_back(r.get<std::uint32_t>());
            s.episode.push_back(r.get<std::uint64_t>());
        }
        r.expect_end();
        return s;
    }
};

inline std::vector<std::uint8_t> encode_obs(std::size_t rows, std::size_t obs_dim, const std::vector<double>& obs) {
    Writer w;
    w.put(static_cast<std::uint32_t>(rows));
    w.put(static_cast<std::uint32_t>(obs_dim));
    for (double v : obs) w.put(static_cast<float>(v));
    return w.bytes;
}

inline std::vector<float> decode_obs(const std::vector<std::uint8_t>& b, std::size_t& rows, std::size_t& obs_dim) {
    Reader r(b);
    rows = r.get<std::uint32_t>();
    obs_dim = r.get<std::uint32_t>();
    if (obs_dim != 0 && r.remaining() / 4 / obs_dim != rows) throw ProtocolError(ErrorCode::Malformed, "bad obs frame");
    std::vector<float> out(rows * obs_dim);
    for (auto& v : out) v = r.get<float>();
    r.expect_end();
    return out;
}

// --- server ----------------------------------------------------------------------------------

/// Serves one client connection on an already accepted socket. Returns when
/// the client closes, sends CLOSE, or sends a frame that breaks framing.
class Session {
public:
    Session(int fd, VecEnv& env, std::uint64_t config_hash) : fd_(fd), env_(env), hash_(config_hash) {}

    void run() {
        Frame f;
        while (true) {
            const ReadStatus st = recv_frame(fd_, f);
            if (st == ReadStatus::Closed) return;
            if (st == ReadStatus::TooLarge || st == ReadStatus::Empty) {
                // The stream position is lost, so the session cannot continue.
                send_error(st == ReadStatus::TooLarge ? ErrorCode::TooLarge : ErrorCode::Malformed,
                           st == ReadStatus::TooLarge ? "frame exceeds the size limit" : "zero-length frame");
                return;
            }
            if (f.type == FrameType::Close) return;
            try {
                handle(f);
            } catch (const ProtocolError& e) {
                if (!send_error(e.code, e.what())) return;
            } catch (const std::exception& e) {
                if (!send_error(ErrorCode::Internal, e.what())) return;
            }
        }
    }

private:
    bool send_error(ErrorCode c, const std::string& msg) { return send_frame(fd_, FrameType::Error, error_payload(c, msg)); }

    Hello server_hello() const {
        return {kProtocolVersion, hash_, static_cast<std::uint32_t>(env_.num_envs()),
                static_cast<std::uint32_t>(env_.obs_dim()), static_cast<std::uint32_t>(env_.act_dim())};
    }

    void handle(const Frame& f) {
        switch (f.type) {
            case FrameType::Hello: {
                const Hello h = Hello::decode(f.payload);
                if (h.version != kProtocolVersion)
                    throw ProtocolError(ErrorCode::BadVersion, "unsupported protocol version " + std::to_string(h.version));
                const Hello mine = server_hello();
                // Zero fields mean "accept whatever the server has".
                if ((h.n_envs && h.n_envs != mine.n_envs) || (h.obs_dim && h.obs_dim != mine.obs_dim) ||
                    (h.act_dim && h.act_dim != mine.act_dim))
                    throw ProtocolError(ErrorCode::ShapeMismatch, "requested shapes do not match the environment");
                if (h.config_hash && h.config_hash != mine.config_hash)
                    throw ProtocolError(ErrorCode::ShapeMismatch, "config hash differs from the server's");
                ready_ = true;
                send_frame(fd_, FrameType::Hello, mine.encode());
                return;
            }
            case FrameType::Reset: {
                require_ready();
                Reader r(f.payload);
                const std::uint32_t count = r.get<std::uint32_t>();
                if (r.remaining() != 4ull * count) throw ProtocolError(ErrorCode::Malformed, "reset id list has the wrong length");
                std::vector<std::size_t> ids;
                for (std::uint32_t i = 0; i < count; ++i) {
                    const std::uint32_t id = r.get<std::uint32_t>();
                    if (id >= env_.num_envs()) throw ProtocolError(ErrorCode::ShapeMismatch, "reset id out of range");
                    ids.push_back(id);
                }
                std::vector<double> obs;
                if (ids.empty()) {
                    obs = env_.reset();
                    ids.resize(env_.num_envs());
                } else {
                    obs = env_.reset(ids);
                }
                send_frame(fd_, FrameType::Obs, encode_obs(ids.size(), env_.obs_dim(), obs));
                return;
            }
            case FrameType::Step: {
                require_ready();
                const std::size_t expect = env_.num_envs() * env_.act_dim();
                if (f.payload.size() != 4 * expect)
                    throw ProtocolError(ErrorCode::ShapeMismatch, "action batch must hold " + std::to_string(expect) + " floats");
                Reader r(f.payload);
                std::vector<double> actions(expect);
                for (auto& a : actions) a = static_cast<double>(r.get<float>());
                const StepResult res = env_.step(actions);
                send_frame(fd_, FrameType::StepResult, StepReply::from(res).encode());
                return;
            }
            default:
                throw ProtocolError(ErrorCode::UnknownType, "unexpected frame type " +
                                                                std::to_string(static_cast<int>(f.type)));
        }
    }

    void require_ready() const {
        if (!ready_) throw ProtocolError(ErrorCode::NotReady, "HELLO must come first");
    }

    int fd_;
    VecEnv& env_;
    std::uint64_t hash_;
    bool ready_ = false;
};

class Listener {
public:
    explicit Listener(const std::string& path) : path_(path) {
        fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (fd_ < 0) throw std::runtime_error("socket: " + std::string(std::strerror(errno)));
        const sockaddr_un addr = detail::unix_address(path);
        ::unlink(path.c_str());
        if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 4) != 0) {
            const std::string err = std::strerror(errno);
            ::close(fd_);
            throw std::runtime_error("cannot listen on " + path + ": " + err);
        }
    }
    ~Listener() {
        ::close(fd_);
        ::unlink(path_.c_str());
    }
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    int accept() const {
        while (true) {
            const int c = ::accept(fd_, nullptr, nullptr);
            if (c >= 0 || errno != EINTR) return c;
        }
    }

private:
    std::string path_;
    int fd_ = -1;
};

/// Accepts `sessions` clients one after another (0 means forever). The
/// environment persists across sessions.
inline void serve(VecEnv& env, std::uint64_t config_hash, const Listener& listener, std::size_t sessions = 0) {
    for (std::size_t k = 0; sessions == 0 || k < sessions; ++k) {
        const int c = listener.accept();
        if (c < 0) throw std::runtime_error("accept: " + std::string(std::strerror(errno)));
        Session(c, env, config_hash).run();
        ::close(c);
    }
}

// --- client ----------------------------------------------------------------------------------

class Client {
public:
    explicit Client(const std::string& path) {
        fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (fd_ < 0) throw std::runtime_error("socket: " + std::string(std::strerror(errno)));
        const sockaddr_un addr = detail::unix_address(path);
        if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
            const std::string err = std::strerror(errno);
            ::close(fd_);
            throw std::runtime_error("cannot connect to " + path + ": " + err);
        }
    }
    ~Client() { ::close(fd_); }
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    int fd() const { return fd_; }

    Hello hello(const Hello& h = {}) {
        send_frame(fd_, FrameType::Hello, h.encode());
        return Hello::decode(expect(FrameType::Hello).payload);
    }

    std::vector<float> reset(const std::vector<std::uint32_t>& ids = {}) {
        Writer w;
        w.put(static_cast<std::uint32_t>(ids.size()));
        for (auto id : ids) w.put(id);
        send_frame(fd_, FrameType::Reset, w.bytes);
        std::size_t rows = 0, dim = 0;
        return decode_obs(expect(FrameType::Obs).payload, rows, dim);
    }

    StepReply step(const std::vector<float>& actions) {
        Writer w;
        for (float a : actions) w.put(a);
        send_frame(fd_, FrameType::Step, w.bytes);
        return StepReply::decode(expect(FrameType::StepResult).payload);
    }

    void close() { send_frame(fd_, FrameType::Close, {}); }

    /// Next frame; error frames become ProtocolError.
    Frame expect(FrameType type) {
        Frame f;
        if (recv_frame(fd_, f) != ReadStatus::Ok) throw std::runtime_error("connection closed by server");
        if (f.type == FrameType::Error) {
            Reader r(f.payload);
            const auto code = static_cast<ErrorCode>(r.get<std::uint16_t>());
            const auto len = r.get<std::uint32_t>();
            throw ProtocolError(code, r.get_bytes(len));
        }
        if (f.type != type) throw std::runtime_error("unexpected reply frame type");
        return f;
    }

private:
    int fd_ = -1;
};

}  // namespace quadgym::bridge
