#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "trendmap/errors.hpp"
#include "trendmap/linalg.hpp"
#include "trendmap/records.hpp"
#include "trendmap/textio.hpp"

namespace trendmap {

enum class NormKind { none, l1, l2, max };

inline const char* norm_kind_name(NormKind k) {
    switch (k) {
        case NormKind::l1: return "l1";
        case NormKind::l2: return "l2";
        case NormKind::max: return "max";
        default: return "none";
    }
}

inline NormKind norm_kind_from(std::string_view s) {
    if (s == "none") return NormKind::none;
    if (s == "l1") return NormKind::l1;
    if (s == "l2") return NormKind::l2;
    if (s == "max") return NormKind::max;
    throw format_error("unknown row norm: " + std::string(s));
}

struct NormDescriptor {
    bool log_applied = false;
    NormKind row_norm = NormKind::none;
};

enum class FeatureAxis { domain, building };

/// user x feature totals, one row per user. Axis labels are sorted
/// lexicographically so identical record multisets give identical matrices.
struct UsageMatrix {
    std::vector<std::string> users;
    std::vector<std::string> features;
    std::string row_axis_name = "users";
    std::string feature_axis_name;  // "domains" or "buildings"
    Dense2 values;                  // users x features, minutes
};

/// user x domain x building totals; the per-user slice is a domain x building
/// matrix stored row-major.
struct UsageTensor {
    std::vector<std::string> users;
    std::vector<std::string> domains;
    std::vector<std::string> buildings;
    std::vector<double> values;

    std::size_t slice_size() const { return domains.size() * buildings.size(); }
    double& at(std::size_t u, std::size_t d, std::size_t b) {
        return values[(u * domains.size() + d) * buildings.size() + b];
    }
    double at(std::size_t u, std::size_t d, std::size_t b) const {
        return values[(u * domains.size() + d) * buildings.size() + b];
    }
    std::span<const double> slice(std::size_t u) const {
        return {values.data() + u * slice_size(), slice_size()};
    }
    std::span<double> slice(std::size_t u) {
        return {values.data() + u * slice_size(), slice_size()};
    }
};

struct NormalizedMatrix {
    UsageMatrix matrix;
    NormDescriptor norm;
    std::vector<double> row_scales;  // pre-scaling norm per user row
};

struct NormalizedTensor {
    UsageTensor tensor;
    NormDescriptor norm;
    std::vector<double> row_scales;  // per user slice
};

namespace detail {

inline bool record_less(const UsageRecord& a, const UsageRecord& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.domain != b.domain) return a.domain < b.domain;
    if (a.building != b.building) return a.building < b.building;
    if (a.period != b.period) return a.period < b.period;
    return a.online_minutes < b.online_minutes;
}

// Canonical accumulation order, so sums do not depend on input permutation.
inline std::vector<UsageRecord> sorted_records(std::vector<UsageRecord> records) {
    std::sort(records.begin(), records.end(), record_less);
    return records;
}

inline std::vector<std::string> sorted_unique(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

inline std::size_t index_of(const std::vector<std::string>& v, const std::string& s) {
    return static_cast<std::size_t>(
        std::lower_bound(v.begin(), v.end(), s) - v.begin());
}

// Top-k labels by descending total minutes, ties broken by name. Returned
// sorted lexicographically so axis order stays canonical.
inline std::vector<std::string> top_k_labels(
    const std::map<std::string, double>& totals, std::size_t k, const char* what) {
    std::vector<std::pair<std::string, double>> ranked(totals.begin(), totals.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() < k) {
        std::cerr << "warning: only " << ranked.size() << " distinct " << what
                  << " available, requested " << k << "\n";
        k = ranked.size();
    }
    std::vector<std::string> keep;
    keep.reserve(k);
    for (std::size_t i = 0; i < k; ++i) keep.push_back(ranked[i].first);
    std::sort(keep.begin(), keep.end());
    return keep;
}

inline double row_norm_value(std::span<const double> row, NormKind kind) {
    switch (kind) {
        case NormKind::l1: {
            double s = 0.0;
            for (double v : row) s += std::abs(v);
            return s;
        }
        case NormKind::l2:
            return norm2(row);
        case NormKind::max: {
            double m = 0.0;
            for (double v : row) m = std::max(m, std::abs(v));
            return m;
        }
        default:
            return 1.0;
    }
}

inline double normalize_row(std::span<double> row, bool log_applied, NormKind kind) {
    if (log_applied)
        for (double& v : row) v = std::log1p(v);
    double scale = row_norm_value(row, kind);
    if (kind != NormKind::none && scale > 0.0)
        for (double& v : row) v /= scale;
    return scale;
}

}  // namespace detail

/// Sums online minutes into a user x feature matrix, collapsing periods and
/// the other axis.
inline UsageMatrix build_matrix(const std::vector<UsageRecord>& records,
                                FeatureAxis axis) {
    if (records.empty()) throw compute_error("no usage records to build a matrix from");
    const auto sorted = detail::sorted_records(records);

    std::vector<std::string> users, features;
    for (const auto& r : sorted) {
        users.push_back(r.user);
        features.push_back(axis == FeatureAxis::domain ? r.domain : r.building);
    }
    users = detail::sorted_unique(std::move(users));
    features = detail::sorted_unique(std::move(features));

    UsageMatrix out;
    out.users = std::move(users);
    out.features = std::move(features);
    out.feature_axis_name = axis == FeatureAxis::domain ? "domains" : "buildings";
    out.values = Dense2(out.users.size(), out.features.size());
    for (const auto& r : sorted) {
        const std::size_t u = detail::index_of(out.users, r.user);
        const std::size_t f = detail::index_of(
            out.features, axis == FeatureAxis::domain ? r.domain : r.building);
        out.values.at(u, f) += r.online_minutes;
    }
    return out;
}

/// Restricts the domain/building axes to the top-k most active labels by
/// total minutes, then sums into a user x domain x building tensor.
inline UsageTensor build_tensor(const std::vector<UsageRecord>& records,
                                std::size_t top_domains, std::size_t top_buildings) {
    if (records.empty()) throw compute_error("no usage records to build a tensor from");
    if (top_domains < 1 || top_buildings < 1)
        throw std::invalid_argument("tensor axis limits must be >= 1");
    const auto sorted = detail::sorted_records(records);

    std::map<std::string, double> domain_totals, building_totals;
    for (const auto& r : sorted) {
        domain_totals[r.domain] += r.online_minutes;
        building_totals[r.building] += r.online_minutes;
    }
    UsageTensor out;
    out.domains = detail::top_k_labels(domain_totals, top_domains, "domains");
    out.buildings = detail::top_k_labels(building_totals, top_buildings, "buildings");

    std::vector<std::string> users;
    for (const auto& r : sorted)
        if (std::binary_search(out.domains.begin(), out.domains.end(), r.domain) &&
            std::binary_search(out.buildings.begin(), out.buildings.end(), r.building))
            users.push_back(r.user);
    if (users.empty())
        throw compute_error("no usage records fall inside the tensor axes");
    out.users = detail::sorted_unique(std::move(users));

    out.values.assign(out.users.size() * out.slice_size(), 0.0);
    for (const auto& r : sorted) {
        if (!std::binary_search(out.domains.begin(), out.domains.end(), r.domain) ||
            !std::binary_search(out.buildings.begin(), out.buildings.end(), r.building))
            continue;
        const std::size_t u = detail::index_of(out.users, r.user);
        const std::size_t d = detail::index_of(out.domains, r.domain);
        const std::size_t b = detail::index_of(out.buildings, r.building);
        out.at(u, d, b) += r.online_minutes;
    }
    return out;
}

/// log(1+x) per cell when requested, then scales each user row to unit norm.
/// Zero rows are left untouched; the pre-scaling norm of every row is kept so
/// synthetic data can be mapped back to minutes later.
inline NormalizedMatrix normalize(const UsageMatrix& m, bool log_applied,
                                  NormKind row_norm) {
    NormalizedMatrix out;
    out.matrix = m;
    out.norm = {log_applied, row_norm};
    out.row_scales.resize(m.users.size());
    for (std::size_t u = 0; u < m.users.size(); ++u)
        out.row_scales[u] =
            detail::normalize_row(out.matrix.values.row(u), log_applied, row_norm);
    return out;
}

/// Tensor variant: each user slice, flattened, is treated as one row.
inline NormalizedTensor normalize(const UsageTensor& t, bool log_applied,
                                  NormKind row_norm) {
    NormalizedTensor out;
    out.tensor = t;
    out.norm = {log_applied, row_norm};
    out.row_scales.resize(t.users.size());
    for (std::size_t u = 0; u < t.users.size(); ++u)
        out.row_scales[u] =
            detail::normalize_row(out.tensor.slice(u), log_applied, row_norm);
    return out;
}

/// Removes users whose entire row is zero; they carry no trend signal.
inline UsageMatrix drop_zero_users(const UsageMatrix& m, std::size_t* dropped = nullptr) {
    UsageMatrix out;
    out.features = m.features;
    out.feature_axis_name = m.feature_axis_name;
    std::vector<std::size_t> keep;
    for (std::size_t u = 0; u < m.users.size(); ++u) {
        auto row = m.values.row(u);
        bool all_zero = std::all_of(row.begin(), row.end(),
                                    [](double v) { return v == 0.0; });
        if (!all_zero) keep.push_back(u);
    }
    if (dropped) *dropped = m.users.size() - keep.size();
    if (keep.size() < m.users.size())
        std::cerr << "warning: dropping " << (m.users.size() - keep.size())
                  << " all-zero users before training\n";
    out.values = Dense2(keep.size(), m.features.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.users.push_back(m.users[keep[i]]);
        auto src = m.values.row(keep[i]);
        std::copy(src.begin(), src.end(), out.values.row(i).begin());
    }
    return out;
}

inline UsageTensor drop_zero_users(const UsageTensor& t, std::size_t* dropped = nullptr) {
    UsageTensor out;
    out.domains = t.domains;
    out.buildings = t.buildings;
    std::vector<std::size_t> keep;
    for (std::size_t u = 0; u < t.users.size(); ++u) {
        auto s = t.slice(u);
        bool all_zero =
            std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; });
        if (!all_zero) keep.push_back(u);
    }
    if (dropped) *dropped = t.users.size() - keep.size();
    if (keep.size() < t.users.size())
        std::cerr << "warning: dropping " << (t.users.size() - keep.size())
                  << " all-zero users before training\n";
    out.values.assign(keep.size() * t.slice_size(), 0.0);
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.users.push_back(t.users[keep[i]]);
        auto src = t.slice(keep[i]);
        std::copy(src.begin(), src.end(),
                  out.values.begin() + static_cast<std::ptrdiff_t>(i * t.slice_size()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Text serialization. Self-describing header, then one line of reals per
// user row (tensor slices flattened row-major). Reals are written in
// shortest round-trip form, so save/load is lossless and byte-stable.
//
//   trendmap-matrix 1
//   kind matrix|tensor
//   normalization log=0|1 row_norm=none|l1|l2|max
//   axis <name> <count>      (repeated; 2 axes for matrix, 3 for tensor)
//   <count label lines each>
//   data
//   <axis0-count rows of reals>
//   end
// ---------------------------------------------------------------------------

namespace detail {

inline void write_axis(std::ostream& out, const std::string& name,
                       const std::vector<std::string>& labels) {
    out << "axis " << name << ' ' << labels.size() << '\n';
    for (const auto& l : labels) out << l << '\n';
}

inline void write_rows(std::ostream& out, const std::vector<double>& values,
                       std::size_t nrows, std::size_t rowlen) {
    for (std::size_t r = 0; r < nrows; ++r) {
        for (std::size_t c = 0; c < rowlen; ++c) {
            if (c) out << ' ';
            out << format_double(values[r * rowlen + c]);
        }
        out << '\n';
    }
}

inline std::string expect_line(std::istream& in, const char* context) {
    std::string line;
    if (!std::getline(in, line))
        throw format_error(std::string("matrix file truncated in ") + context);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

struct MatrixHeader {
    std::string kind;
    NormDescriptor norm;
    std::vector<std::string> axis_names;
    std::vector<std::vector<std::string>> axis_labels;
};

inline MatrixHeader read_matrix_header(std::istream& in) {
    MatrixHeader h;
    if (expect_line(in, "magic") != "trendmap-matrix 1")
        throw format_error("not a trendmap matrix file");
    {
        auto f = split_whitespace(expect_line(in, "kind"));
        if (f.size() != 2 || f[0] != "kind") throw format_error("expected kind line");
        h.kind = std::string(f[1]);
    }
    {
        auto f = split_whitespace(expect_line(in, "normalization"));
        if (f.size() != 3 || f[0] != "normalization" || !f[1].starts_with("log=") ||
            !f[2].starts_with("row_norm="))
            throw format_error("expected normalization line");
        h.norm.log_applied = f[1].substr(4) == "1";
        h.norm.row_norm = norm_kind_from(f[2].substr(9));
    }
    const std::size_t n_axes = h.kind == "tensor" ? 3 : 2;
    for (std::size_t a = 0; a < n_axes; ++a) {
        auto f = split_whitespace(expect_line(in, "axis"));
        if (f.size() != 3 || f[0] != "axis") throw format_error("expected axis line");
        h.axis_names.emplace_back(f[1]);
        std::size_t count = static_cast<std::size_t>(parse_uint64(f[2]));
        std::vector<std::string> labels;
        labels.reserve(count);
        for (std::size_t i = 0; i < count; ++i)
            labels.push_back(expect_line(in, "axis label"));
        h.axis_labels.push_back(std::move(labels));
    }
    if (expect_line(in, "data") != "data") throw format_error("expected data line");
    return h;
}

inline std::vector<double> read_rows(std::istream& in, std::size_t nrows,
                                     std::size_t rowlen) {
    std::vector<double> values;
    values.reserve(nrows * rowlen);
    for (std::size_t r = 0; r < nrows; ++r) {
        auto fields = split_whitespace(expect_line(in, "data row"));
        if (fields.size() != rowlen)
            throw format_error("matrix row has wrong number of values");
        for (auto f : fields) values.push_back(parse_double(f));
    }
    if (expect_line(in, "end") != "end") throw format_error("expected end line");
    return values;
}

}  // namespace detail

inline void write_matrix(std::ostream& out, const UsageMatrix& m,
                         const NormDescriptor& norm = {}) {
    out << "trendmap-matrix 1\n";
    out << "kind matrix\n";
    out << "normalization log=" << (norm.log_applied ? 1 : 0)
        << " row_norm=" << norm_kind_name(norm.row_norm) << '\n';
    detail::write_axis(out, m.row_axis_name.empty() ? "users" : m.row_axis_name,
                       m.users);
    detail::write_axis(out, m.feature_axis_name.empty() ? "features"
                                                        : m.feature_axis_name,
                       m.features);
    out << "data\n";
    detail::write_rows(out, m.values.data, m.users.size(), m.features.size());
    out << "end\n";
}

inline NormalizedMatrix read_matrix(std::istream& in) {
    auto h = detail::read_matrix_header(in);
    if (h.kind != "matrix") throw format_error("expected kind matrix");
    NormalizedMatrix out;
    out.norm = h.norm;
    out.matrix.users = std::move(h.axis_labels[0]);
    out.matrix.features = std::move(h.axis_labels[1]);
    out.matrix.row_axis_name = h.axis_names[0];
    out.matrix.feature_axis_name = h.axis_names[1];
    out.matrix.values.rows = out.matrix.users.size();
    out.matrix.values.cols = out.matrix.features.size();
    out.matrix.values.data =
        detail::read_rows(in, out.matrix.values.rows, out.matrix.values.cols);
    return out;
}

inline void write_tensor(std::ostream& out, const UsageTensor& t,
                         const NormDescriptor& norm = {}) {
    out << "trendmap-matrix 1\n";
    out << "kind tensor\n";
    out << "normalization log=" << (norm.log_applied ? 1 : 0)
        << " row_norm=" << norm_kind_name(norm.row_norm) << '\n';
    detail::write_axis(out, "users", t.users);
    detail::write_axis(out, "domains", t.domains);
    detail::write_axis(out, "buildings", t.buildings);
    out << "data\n";
    detail::write_rows(out, t.values, t.users.size(), t.slice_size());
    out << "end\n";
}

inline NormalizedTensor read_tensor(std::istream& in) {
    auto h = detail::read_matrix_header(in);
    if (h.kind != "tensor") throw format_error("expected kind tensor");
    NormalizedTensor out;
    out.norm = h.norm;
    out.tensor.users = std::move(h.axis_labels[0]);
    out.tensor.domains = std::move(h.axis_labels[1]);
    out.tensor.buildings = std::move(h.axis_labels[2]);
    out.tensor.values = detail::read_rows(in, out.tensor.users.size(),
                                          out.tensor.slice_size());
    return out;
}

/// Wraps a bare numeric grid (U-matrix, feature map, heatmap) in the matrix
/// format so every image export has a numeric twin.
inline UsageMatrix grid_as_matrix(const Dense2& grid, const std::string& row_axis,
                                  const std::string& col_axis) {
    UsageMatrix m;
    m.row_axis_name = row_axis;
    m.feature_axis_name = col_axis;
    for (std::size_t r = 0; r < grid.rows; ++r) m.users.push_back(std::to_string(r));
    for (std::size_t c = 0; c < grid.cols; ++c) m.features.push_back(std::to_string(c));
    m.values = grid;
    return m;
}

}  // namespace trendmap
