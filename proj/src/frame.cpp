#include "gridloop/frame.hpp"

#include <array>
#include <vector>

namespace gridloop::hub {

namespace {

bool segment_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
}

bool valid_topic_impl(std::string_view t, bool allow_wildcard) {
    if (t.empty()) return false;
    std::size_t seg_len = 0;
    bool seg_is_star = false;
    for (std::size_t i = 0; i <= t.size(); ++i) {
        if (i == t.size() || t[i] == '/') {
            if (seg_len == 0) return false;
            if (seg_is_star && seg_len != 1) return false;
            seg_len = 0;
            seg_is_star = false;
            continue;
        }
        char c = t[i];
        if (c == '*') {
            if (!allow_wildcard || seg_len != 0) return false;
            seg_is_star = true;
        } else if (!segment_char(c)) {
            return false;
        } else if (seg_is_star) {
            return false;
        }
        ++seg_len;
    }
    return true;
}

struct Splitter {
    std::string_view rest;
    // Next space-separated token; empty tokens (double spaces) are invalid.
    std::optional<std::string_view> next() {
        if (rest.empty()) return std::nullopt;
        auto pos = rest.find(' ');
        std::string_view tok = rest.substr(0, pos);
        rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
        if (tok.empty()) return std::nullopt; // signals malformed spacing
        return tok;
    }
    bool done() const { return rest.empty(); }
};

std::string_view require(Splitter& sp, const char* what) {
    auto tok = sp.next();
    if (!tok) throw MalformedFrame(std::string("missing ") + what);
    return *tok;
}

std::string parse_topic_token(Splitter& sp, bool allow_wildcard) {
    auto tok = require(sp, "topic");
    if (!valid_topic_impl(tok, allow_wildcard)) throw MalformedFrame("bad topic");
    return std::string(tok);
}

std::uint64_t parse_seq_token(Splitter& sp) {
    auto tok = require(sp, "seq");
    std::uint64_t v;
    if (!parse_u64(tok, v)) throw MalformedFrame("bad seq");
    return v;
}

Micros parse_ts_token(Splitter& sp) {
    auto tok = require(sp, "ts");
    Micros v;
    if (!parse_i64(tok, v)) throw MalformedFrame("bad ts");
    return v;
}

Payload parse_value_token(Splitter& sp) {
    if (sp.rest.empty()) throw MalformedFrame("missing value");
    if (sp.rest.front() == '"') {
        // quoted string: everything up to the closing quote, which must be
        // the last character of the line
        std::string_view body = sp.rest.substr(1);
        auto close = body.find('"');
        if (close == std::string_view::npos) throw MalformedFrame("unterminated string");
        if (close + 1 != body.size()) throw MalformedFrame("trailing bytes after string");
        sp.rest = {};
        return std::string(body.substr(0, close));
    }
    auto tok = require(sp, "value");
    double v;
    if (!parse_double(tok, v)) throw MalformedFrame("bad value");
    return v;
}

void expect_end(const Splitter& sp) {
    if (!sp.done()) throw MalformedFrame("trailing fields");
}

void encode_value(std::string& out, const Payload& p) {
    if (std::holds_alternative<double>(p)) {
        out += format_double(std::get<double>(p));
        return;
    }
    const std::string& s = std::get<std::string>(p);
    if (s.find('"') != std::string::npos || s.find('\n') != std::string::npos)
        throw MalformedFrame("string payload may not contain quote or newline");
    out += '"';
    out += s;
    out += '"';
}

bool valid_err_code(std::string_view c) {
    if (c.empty()) return false;
    for (char ch : c)
        if (!segment_char(ch)) return false;
    return true;
}

} // namespace

bool valid_topic(std::string_view topic) { return valid_topic_impl(topic, false); }
bool valid_pattern(std::string_view pattern) { return valid_topic_impl(pattern, true); }

bool topic_matches(std::string_view pattern, std::string_view topic) {
    std::size_t pi = 0, ti = 0;
    while (true) {
        auto pe = pattern.find('/', pi);
        auto te = topic.find('/', ti);
        std::string_view pseg = pattern.substr(pi, pe == std::string_view::npos ? pe : pe - pi);
        std::string_view tseg = topic.substr(ti, te == std::string_view::npos ? te : te - ti);
        if (pseg != "*" && pseg != tseg) return false;
        bool p_last = pe == std::string_view::npos;
        bool t_last = te == std::string_view::npos;
        if (p_last || t_last) return p_last && t_last;
        pi = pe + 1;
        ti = te + 1;
    }
}

Frame parse_frame(std::string_view line) {
    if (line.size() > kMaxFrameBytes) throw MalformedFrame("frame too long");
    if (line.empty() || line.back() != '\n') throw MalformedFrame("missing newline");
    line.remove_suffix(1);
    if (!line.empty() && line.back() == '\r') throw MalformedFrame("CR not allowed");
    if (line.find('\n') != std::string_view::npos) throw MalformedFrame("embedded newline");
    if (!line.empty() && line.back() == ' ') throw MalformedFrame("trailing space");

    Splitter sp{line};
    auto cmd_tok = require(sp, "command");

    Frame f;
    if (cmd_tok == "SET" || cmd_tok == "PUB" || cmd_tok == "MSG") {
        f.cmd = cmd_tok == "SET" ? Cmd::Set : (cmd_tok == "PUB" ? Cmd::Pub : Cmd::Msg);
        f.topic = parse_topic_token(sp, false);
        f.seq = parse_seq_token(sp);
        f.ts_us = parse_ts_token(sp);
        f.payload = parse_value_token(sp);
        expect_end(sp);
    } else if (cmd_tok == "GET") {
        f.cmd = Cmd::Get;
        f.topic = parse_topic_token(sp, false);
        expect_end(sp);
    } else if (cmd_tok == "SUB" || cmd_tok == "UNSUB") {
        f.cmd = cmd_tok == "SUB" ? Cmd::Sub : Cmd::Unsub;
        f.topic = parse_topic_token(sp, true);
        expect_end(sp);
    } else if (cmd_tok == "PING") {
        f.cmd = Cmd::Ping;
        expect_end(sp);
    } else if (cmd_tok == "PONG") {
        f.cmd = Cmd::Pong;
        f.ts_us = parse_ts_token(sp);
        expect_end(sp);
    } else if (cmd_tok == "OK") {
        f.cmd = Cmd::Ok;
        if (!sp.done()) {
            auto tok = require(sp, "count");
            std::uint64_t n;
            if (!parse_u64(tok, n)) throw MalformedFrame("bad count");
            f.count = n;
            expect_end(sp);
        }
    } else if (cmd_tok == "ERR") {
        f.cmd = Cmd::Err;
        auto tok = require(sp, "code");
        if (!valid_err_code(tok)) throw MalformedFrame("bad error code");
        f.code = std::string(tok);
        expect_end(sp);
    } else {
        throw MalformedFrame("unknown command");
    }
    return f;
}

std::string encode_frame(const Frame& f) {
    std::string out;
    switch (f.cmd) {
    case Cmd::Set:
    case Cmd::Pub:
    case Cmd::Msg: {
        out = f.cmd == Cmd::Set ? "SET " : (f.cmd == Cmd::Pub ? "PUB " : "MSG ");
        if (!valid_topic(f.topic)) throw MalformedFrame("invalid topic");
        out += f.topic;
        out += ' ';
        out += std::to_string(f.seq);
        out += ' ';
        out += std::to_string(f.ts_us);
        out += ' ';
        encode_value(out, f.payload);
        break;
    }
    case Cmd::Get:
        if (!valid_topic(f.topic)) throw MalformedFrame("invalid topic");
        out = "GET " + f.topic;
        break;
    case Cmd::Sub:
    case Cmd::Unsub:
        if (!valid_pattern(f.topic)) throw MalformedFrame("invalid pattern");
        out = (f.cmd == Cmd::Sub ? "SUB " : "UNSUB ") + f.topic;
        break;
    case Cmd::Ping:
        out = "PING";
        break;
    case Cmd::Pong:
        out = "PONG " + std::to_string(f.ts_us);
        break;
    case Cmd::Ok:
        out = "OK";
        if (f.count) {
            out += ' ';
            out += std::to_string(*f.count);
        }
        break;
    case Cmd::Err:
        if (!valid_err_code(f.code)) throw MalformedFrame("invalid error code");
        out = "ERR " + f.code;
        break;
    }
    out += '\n';
    if (out.size() > kMaxFrameBytes) throw MalformedFrame("frame too long");
    return out;
}

} // namespace gridloop::hub
