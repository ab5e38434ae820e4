#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "trendmap/errors.hpp"
#include "trendmap/timeparse.hpp"

namespace trendmap {

using Ipv4 = std::uint32_t;

/// A MAC address in canonical lowercase colon form ("aa:bb:cc:dd:ee:ff").
using Mac = std::string;

inline constexpr TimestampMs kUnboundedTs = std::numeric_limits<TimestampMs>::max();

inline Ipv4 parse_ipv4(std::string_view text) {
    std::uint32_t octets[4];
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        std::uint32_t value = 0;
        std::size_t digits = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            value = value * 10 + static_cast<std::uint32_t>(text[pos] - '0');
            ++pos;
            ++digits;
        }
        if (digits == 0 || digits > 3 || value > 255)
            throw format_error("bad IPv4 address: " + std::string(text));
        octets[i] = value;
        if (i < 3) {
            if (pos >= text.size() || text[pos] != '.')
                throw format_error("bad IPv4 address: " + std::string(text));
            ++pos;
        }
    }
    if (pos != text.size()) throw format_error("bad IPv4 address: " + std::string(text));
    return (octets[0] << 24) | (octets[1] << 16) | (octets[2] << 8) | octets[3];
}

inline std::string format_ipv4(Ipv4 ip) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", ip >> 24, (ip >> 16) & 0xff,
                  (ip >> 8) & 0xff, ip & 0xff);
    return buf;
}

/// First 24 bits of an IPv4 address, the granularity of destination filtering.
inline Ipv4 prefix24(Ipv4 ip) { return ip & 0xffffff00u; }

/// Accepts colon- or dash-separated hex pairs, any case; canonicalizes to
/// lowercase colon form.
inline Mac parse_mac(std::string_view text) {
    auto hex = [&](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    char out[18];
    std::size_t pos = 0;
    for (int i = 0; i < 6; ++i) {
        if (pos + 2 > text.size())
            throw format_error("bad MAC address: " + std::string(text));
        int hi = hex(text[pos]), lo = hex(text[pos + 1]);
        if (hi < 0 || lo < 0) throw format_error("bad MAC address: " + std::string(text));
        out[i * 3] = "0123456789abcdef"[hi];
        out[i * 3 + 1] = "0123456789abcdef"[lo];
        out[i * 3 + 2] = ':';
        pos += 2;
        if (i < 5) {
            if (pos >= text.size() || (text[pos] != ':' && text[pos] != '-'))
                throw format_error("bad MAC address: " + std::string(text));
            ++pos;
        }
    }
    if (pos != text.size()) throw format_error("bad MAC address: " + std::string(text));
    return Mac(out, 17);
}

/// One unidirectional flow from the trace.
struct FlowRecord {
    TimestampMs start_ts = 0;
    TimestampMs finish_ts = 0;
    Ipv4 src_ip = 0;
    std::uint16_t src_port = 0;
    Ipv4 dst_ip = 0;
    std::uint16_t dst_port = 0;
    std::uint8_t protocol = 0;
    std::uint8_t tos = 0;
    std::uint64_t packet_count = 0;
    std::uint64_t flow_size_bytes = 0;

    std::int64_t duration_ms() const { return finish_ts - start_ts; }
};

/// A dynamic IP assignment. lease_end == kUnboundedTs means still open.
struct DhcpLease {
    Mac mac;
    Ipv4 ip = 0;
    TimestampMs lease_start = 0;
    TimestampMs lease_end = kUnboundedTs;
};

enum class SessionEventKind { start, end };

/// One AP association event.
struct SessionEvent {
    Mac mac;
    std::string ap_id;
    std::string building;
    SessionEventKind event = SessionEventKind::start;
    TimestampMs ts = 0;
};

/// Static mapping from destination /24 prefixes to domain names. Stands in
/// for offline DNS/whois enrichment. Entries are kept sorted by prefix.
struct DomainMap {
    std::vector<std::pair<Ipv4, std::string>> entries;  // prefix24 -> domain

    const std::string* lookup(Ipv4 prefix) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), prefix,
                                   [](const auto& e, Ipv4 p) { return e.first < p; });
        if (it == entries.end() || it->first != prefix) return nullptr;
        return &it->second;
    }
};

/// Aggregated online time for one (user, domain, building, month) group.
struct UsageRecord {
    Mac user;
    std::string domain;
    std::string building;
    std::string period;  // "YYYY-MM"
    double online_minutes = 0.0;
};

}  // namespace trendmap
