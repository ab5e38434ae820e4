#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "trendmap/errors.hpp"
#include "trendmap/records.hpp"
#include "trendmap/textio.hpp"
#include "trendmap/timeparse.hpp"

namespace trendmap {

/// Column layout of the flow file. delimiter '\0' means auto: lines containing
/// '|' are split on it, otherwise on whitespace.
struct FlowFormat {
    char delimiter = '\0';
    bool skip_header = false;
    int base_year = 2008;  // the trace timestamp form carries no year
};

template <class T>
struct ParseResult {
    std::vector<T> records;
    std::size_t skipped = 0;  // malformed lines
};

namespace detail {

inline std::vector<std::string_view> flow_fields(std::string_view line,
                                                 const FlowFormat& fmt) {
    char delim = fmt.delimiter;
    if (delim == '\0') delim = line.find('|') != std::string_view::npos ? '|' : '\0';
    return delim == '\0' ? split_whitespace(line) : split_on(line, delim);
}

inline std::uint64_t parse_bounded(std::string_view s, std::uint64_t max) {
    std::uint64_t v = parse_uint64(s);
    if (v > max) throw format_error("field out of range: " + std::string(s));
    return v;
}

inline FlowRecord parse_flow_line(std::string_view line, const FlowFormat& fmt) {
    auto f = flow_fields(line, fmt);
    if (f.size() != 10) throw format_error("expected 10 flow columns");
    FlowRecord rec;
    rec.start_ts = parse_timestamp(f[0], fmt.base_year);
    rec.finish_ts = parse_timestamp(f[1], fmt.base_year);
    rec.src_ip = parse_ipv4(f[2]);
    rec.src_port = static_cast<std::uint16_t>(parse_bounded(f[3], 65535));
    rec.dst_ip = parse_ipv4(f[4]);
    rec.dst_port = static_cast<std::uint16_t>(parse_bounded(f[5], 65535));
    rec.protocol = static_cast<std::uint8_t>(parse_bounded(f[6], 255));
    rec.tos = static_cast<std::uint8_t>(parse_bounded(f[7], 255));
    rec.packet_count = parse_uint64(f[8]);
    rec.flow_size_bytes = parse_uint64(f[9]);
    if (rec.finish_ts < rec.start_ts) throw format_error("flow finishes before it starts");
    if (rec.packet_count < 1 || rec.flow_size_bytes < 1)
        throw format_error("flow must carry at least one packet and one byte");
    return rec;
}

}  // namespace detail

/// Reads the flow trace line by line. Malformed lines are counted and
/// skipped; a stream where most lines fail is rejected outright since that
/// signals the wrong file or delimiter.
inline ParseResult<FlowRecord> parse_flows(std::istream& in, const FlowFormat& fmt = {}) {
    if (!in) throw io_error("flow stream is not readable");
    ParseResult<FlowRecord> out;
    std::string line;
    std::size_t considered = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && fmt.skip_header) {
            first = false;
            continue;
        }
        first = false;
        std::string_view sv = trim(line);
        if (sv.empty()) continue;
        ++considered;
        try {
            out.records.push_back(detail::parse_flow_line(sv, fmt));
        } catch (const format_error&) {
            ++out.skipped;
        }
    }
    if (in.bad()) throw io_error("I/O failure while reading flow stream");
    if (considered > 0 && out.skipped * 2 > considered)
        throw format_error("more than half of the flow lines are malformed; "
                           "wrong file or delimiter configuration");
    return out;
}

/// DHCP lease file: `mac,ip,lease_start,lease_end` with "-" for an open end.
inline ParseResult<DhcpLease> parse_dhcp(std::istream& in, int base_year = 2008) {
    if (!in) throw io_error("dhcp stream is not readable");
    ParseResult<DhcpLease> out;
    std::string line;
    std::size_t considered = 0;
    while (std::getline(in, line)) {
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        ++considered;
        try {
            auto f = split_on(sv, ',');
            if (f.size() != 4) throw format_error("expected 4 dhcp columns");
            DhcpLease lease;
            lease.mac = parse_mac(f[0]);
            lease.ip = parse_ipv4(f[1]);
            lease.lease_start = parse_timestamp(f[2], base_year);
            lease.lease_end =
                f[3] == "-" ? kUnboundedTs : parse_timestamp(f[3], base_year);
            if (lease.lease_end <= lease.lease_start)
                throw format_error("lease ends before it starts");
            out.records.push_back(std::move(lease));
        } catch (const format_error&) {
            ++out.skipped;
        }
    }
    if (in.bad()) throw io_error("I/O failure while reading dhcp stream");
    if (considered > 0 && out.skipped * 2 > considered)
        throw format_error("more than half of the dhcp lines are malformed");
    return out;
}

/// Session file: `mac,ap_id,building,event,ts` with event start|end.
inline ParseResult<SessionEvent> parse_sessions(std::istream& in, int base_year = 2008) {
    if (!in) throw io_error("session stream is not readable");
    ParseResult<SessionEvent> out;
    std::string line;
    std::size_t considered = 0;
    while (std::getline(in, line)) {
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        ++considered;
        try {
            auto f = split_on(sv, ',');
            if (f.size() != 5) throw format_error("expected 5 session columns");
            SessionEvent ev;
            ev.mac = parse_mac(f[0]);
            ev.ap_id = std::string(f[1]);
            ev.building = std::string(f[2]);
            if (f[3] == "start")
                ev.event = SessionEventKind::start;
            else if (f[3] == "end")
                ev.event = SessionEventKind::end;
            else
                throw format_error("session event must be start or end");
            ev.ts = parse_timestamp(f[4], base_year);
            if (ev.ap_id.empty() || ev.building.empty())
                throw format_error("session ap/building must be non-empty");
            out.records.push_back(std::move(ev));
        } catch (const format_error&) {
            ++out.skipped;
        }
    }
    if (in.bad()) throw io_error("I/O failure while reading session stream");
    if (considered > 0 && out.skipped * 2 > considered)
        throw format_error("more than half of the session lines are malformed");
    return out;
}

/// Domain map file: `a.b.c.0/24,domain`. Prefixes must be unique.
inline DomainMap parse_domain_map(std::istream& in) {
    if (!in) throw io_error("domain map stream is not readable");
    DomainMap out;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        auto f = split_on(sv, ',');
        if (f.size() != 2 || f[1].empty())
            throw format_error("expected `prefix/24,domain`: " + std::string(sv));
        std::string_view p = f[0];
        if (!p.ends_with("/24"))
            throw format_error("domain map prefixes must be /24: " + std::string(sv));
        p.remove_suffix(3);
        Ipv4 prefix = prefix24(parse_ipv4(p));
        out.entries.emplace_back(prefix, std::string(f[1]));
    }
    if (in.bad()) throw io_error("I/O failure while reading domain map stream");
    std::sort(out.entries.begin(), out.entries.end());
    for (std::size_t i = 1; i < out.entries.size(); ++i)
        if (out.entries[i].first == out.entries[i - 1].first)
            throw format_error("duplicate domain map prefix: " +
                               format_ipv4(out.entries[i].first) + "/24");
    return out;
}

/// Destination /24 prefixes with at least `threshold` flows.
inline std::set<Ipv4> filter_prefixes(const std::vector<FlowRecord>& flows,
                                      std::uint64_t threshold) {
    if (threshold < 1) throw std::invalid_argument("prefix threshold must be >= 1");
    std::unordered_map<Ipv4, std::uint64_t> counts;
    for (const auto& f : flows) ++counts[prefix24(f.dst_ip)];
    std::set<Ipv4> out;
    for (const auto& [p, n] : counts)
        if (n >= threshold) out.insert(p);
    return out;
}

/// IP -> lease intervals, for mapping a flow's source address to a user.
/// Intervals are treated as closed on both ends. Overlapping leases for one
/// IP are normalized by truncating the earlier lease just before the next
/// assignment starts (the new binding supersedes the old one).
class LeaseIndex {
public:
    explicit LeaseIndex(std::vector<DhcpLease> leases) {
        for (auto& l : leases) by_ip_[l.ip].push_back(std::move(l));
        for (auto& [ip, v] : by_ip_) {
            std::sort(v.begin(), v.end(), [](const DhcpLease& a, const DhcpLease& b) {
                if (a.lease_start != b.lease_start) return a.lease_start < b.lease_start;
                return a.mac < b.mac;
            });
            for (std::size_t i = 0; i + 1 < v.size(); ++i)
                if (v[i].lease_end >= v[i + 1].lease_start)
                    v[i].lease_end = v[i + 1].lease_start - 1;
        }
    }

    std::optional<Mac> resolve(Ipv4 ip, TimestampMs ts) const {
        auto it = by_ip_.find(ip);
        if (it == by_ip_.end()) return std::nullopt;
        const auto& v = it->second;
        // last lease starting at or before ts
        auto pos = std::upper_bound(v.begin(), v.end(), ts,
                                    [](TimestampMs t, const DhcpLease& l) {
                                        return t < l.lease_start;
                                    });
        if (pos == v.begin()) return std::nullopt;
        const DhcpLease& l = *(pos - 1);
        if (l.lease_end != kUnboundedTs && ts > l.lease_end) return std::nullopt;
        return l.mac;
    }

private:
    std::unordered_map<Ipv4, std::vector<DhcpLease>> by_ip_;
};

/// Per-user association intervals derived from AP start/end events, for
/// locating a user at a point in time.
///
/// AP logs are lossy, so alternation is repaired per (mac, ap): a start
/// followed by another start closes the first interval at the second start;
/// an end with no open start is dropped; a trailing start with no end stays
/// open-ended.
class SessionIndex {
public:
    explicit SessionIndex(std::vector<SessionEvent> events) {
        std::sort(events.begin(), events.end(),
                  [](const SessionEvent& a, const SessionEvent& b) {
                      if (a.mac != b.mac) return a.mac < b.mac;
                      if (a.ap_id != b.ap_id) return a.ap_id < b.ap_id;
                      if (a.ts != b.ts) return a.ts < b.ts;
                      // starts sort before ends at the same tick
                      return a.event == SessionEventKind::start &&
                             b.event == SessionEventKind::end;
                  });
        for (std::size_t i = 0; i < events.size();) {
            std::size_t j = i;
            while (j < events.size() && events[j].mac == events[i].mac &&
                   events[j].ap_id == events[i].ap_id)
                ++j;
            repair_group(events, i, j);
            i = j;
        }
        for (auto& [mac, v] : by_mac_)
            std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) {
                if (a.start != b.start) return a.start < b.start;
                if (a.end != b.end) return a.end < b.end;
                return a.building < b.building;
            });
    }

    /// Building of the interval containing ts; when several intervals
    /// overlap, the latest-started one wins.
    std::optional<std::string> resolve(const Mac& mac, TimestampMs ts) const {
        auto it = by_mac_.find(mac);
        if (it == by_mac_.end()) return std::nullopt;
        const auto& v = it->second;
        const std::string* best = nullptr;
        TimestampMs best_start = 0;
        for (const auto& iv : v) {
            if (iv.start > ts) break;  // sorted by start
            if (iv.end != kUnboundedTs && ts > iv.end) continue;
            if (!best || iv.start >= best_start) {
                best = &iv.building;
                best_start = iv.start;
            }
        }
        if (!best) return std::nullopt;
        return *best;
    }

private:
    struct Interval {
        TimestampMs start;
        TimestampMs end;  // kUnboundedTs for a session never closed
        std::string building;
    };

    void repair_group(const std::vector<SessionEvent>& events, std::size_t first,
                      std::size_t last) {
        const SessionEvent* open = nullptr;
        for (std::size_t i = first; i < last; ++i) {
            const SessionEvent& ev = events[i];
            if (ev.event == SessionEventKind::start) {
                if (open)  // dangling start: close it at the next start
                    push_interval(*open, ev.ts);
                open = &ev;
            } else {
                if (open) {
                    push_interval(*open, ev.ts);
                    open = nullptr;
                }
                // orphan end: dropped
            }
        }
        if (open) push_interval(*open, kUnboundedTs);
    }

    void push_interval(const SessionEvent& start, TimestampMs end) {
        by_mac_[start.mac].push_back({start.ts, end, start.building});
    }

    std::unordered_map<Mac, std::vector<Interval>> by_mac_;
};

/// Returns the user owning flow.src_ip at the flow's start, if any.
inline std::optional<Mac> resolve_user(const FlowRecord& flow, const LeaseIndex& leases) {
    return leases.resolve(flow.src_ip, flow.start_ts);
}

inline std::optional<std::string> resolve_location(const Mac& mac, TimestampMs ts,
                                                   const SessionIndex& sessions) {
    return sessions.resolve(mac, ts);
}

struct AggregateConfig {
    std::uint64_t prefix_threshold = 100000;
    std::size_t top_domains = 100;
};

/// Bookkeeping from one aggregation run. Durations are tracked in integer
/// milliseconds so the conservation identity holds exactly: within the
/// universe of flows that pass the prefix filter and land in a top-N domain,
/// aggregated time plus dropped time equals total time.
struct IngestReport {
    std::size_t flows_in = 0;
    std::size_t flows_prefix_filtered = 0;
    std::size_t flows_unresolved_domain = 0;
    std::size_t flows_below_top_domains = 0;
    std::size_t flows_dropped_no_user = 0;
    std::size_t flows_aggregated = 0;
    std::size_t records_out = 0;
    std::int64_t ms_universe = 0;
    std::int64_t ms_aggregated = 0;
    std::int64_t ms_dropped = 0;

    bool conservation_ok() const { return ms_aggregated + ms_dropped == ms_universe; }
};

/// Joins flows to users (DHCP) and locations (sessions), maps destinations
/// to domains, keeps the top-N domains by flow count, and totals online time
/// per (user, domain, building, month). Flows without a user or domain are
/// dropped and counted; flows without a location keep building "UNKNOWN".
inline std::vector<UsageRecord> aggregate_usage(const std::vector<FlowRecord>& flows,
                                                const LeaseIndex& leases,
                                                const SessionIndex& sessions,
                                                const DomainMap& domains,
                                                const AggregateConfig& config,
                                                IngestReport* report = nullptr) {
    IngestReport rep;
    rep.flows_in = flows.size();

    const std::set<Ipv4> hot = filter_prefixes(flows, config.prefix_threshold);

    // Rank resolvable domains by flow count within the hot prefixes.
    std::map<std::string, std::uint64_t> domain_flows;
    for (const auto& f : flows) {
        Ipv4 p = prefix24(f.dst_ip);
        if (!hot.count(p)) continue;
        if (const std::string* d = domains.lookup(p)) ++domain_flows[*d];
    }
    std::vector<std::pair<std::string, std::uint64_t>> ranked(domain_flows.begin(),
                                                              domain_flows.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::set<std::string> top;
    for (std::size_t i = 0; i < ranked.size() && i < config.top_domains; ++i)
        top.insert(ranked[i].first);

    // Group key -> accumulated duration in ms.
    std::map<std::tuple<Mac, std::string, std::string, std::string>, std::int64_t> groups;
    for (const auto& f : flows) {
        Ipv4 p = prefix24(f.dst_ip);
        if (!hot.count(p)) {
            ++rep.flows_prefix_filtered;
            continue;
        }
        const std::string* domain = domains.lookup(p);
        if (!domain) {
            ++rep.flows_unresolved_domain;
            continue;
        }
        if (!top.count(*domain)) {
            ++rep.flows_below_top_domains;
            continue;
        }
        rep.ms_universe += f.duration_ms();
        std::optional<Mac> user = resolve_user(f, leases);
        if (!user) {
            ++rep.flows_dropped_no_user;
            rep.ms_dropped += f.duration_ms();
            continue;
        }
        std::string building =
            resolve_location(*user, f.start_ts, sessions).value_or("UNKNOWN");
        groups[{*user, *domain, std::move(building), month_period(f.start_ts)}] +=
            f.duration_ms();
        ++rep.flows_aggregated;
        rep.ms_aggregated += f.duration_ms();
    }

    std::vector<UsageRecord> out;
    out.reserve(groups.size());
    for (const auto& [key, ms] : groups) {
        const auto& [user, domain, building, period] = key;
        out.push_back({user, domain, building, period,
                       static_cast<double>(ms) / 60000.0});
    }
    rep.records_out = out.size();
    if (out.empty() && !flows.empty())
        std::cerr << "warning: aggregation produced no usage records\n";
    if (report) *report = rep;
    return out;
}

/// `user,domain,building,period,online_minutes` with a header line, sorted.
inline void write_usage(std::ostream& out, const std::vector<UsageRecord>& records) {
    out << "user,domain,building,period,online_minutes\n";
    for (const auto& r : records)
        out << r.user << ',' << r.domain << ',' << r.building << ',' << r.period << ','
            << format_double(r.online_minutes) << '\n';
}

inline std::vector<UsageRecord> read_usage(std::istream& in) {
    if (!in) throw io_error("usage stream is not readable");
    std::vector<UsageRecord> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        std::string_view sv = trim(line);
        if (sv.empty()) continue;
        if (first) {
            first = false;
            if (sv == "user,domain,building,period,online_minutes") continue;
        }
        auto f = split_on(sv, ',');
        if (f.size() != 5) throw format_error("expected 5 usage columns: " + line);
        UsageRecord r;
        r.user = std::string(f[0]);
        r.domain = std::string(f[1]);
        r.building = std::string(f[2]);
        r.period = std::string(f[3]);
        r.online_minutes = parse_double(f[4]);
        if (r.online_minutes < 0)
            throw format_error("online_minutes must be non-negative: " + line);
        out.push_back(std::move(r));
    }
    if (in.bad()) throw io_error("I/O failure while reading usage stream");
    return out;
}

}  // namespace trendmap
