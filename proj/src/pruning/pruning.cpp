#include "iotid/pruning.hpp"

#include "iotid/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace iotid {
namespace {

bool is_numeric(const FeatureSchema& s, std::size_t i) { return s[i].kind == FeatureKind::Numeric; }

// Columns are scanned in catalogue order so that the keep-first rule does not
// depend on how a caller happened to order the matrix columns.
std::vector<std::size_t> scan_order(const FeatureSchema& schema) {
    const auto& full = FeatureSchema::full();
    std::vector<std::size_t> order(schema.size());
    std::iota(order.begin(), order.end(), 0);
    auto rank = [&](std::size_t i) { return full.index_of(schema[i].name).value_or(full.size() + i); };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return rank(x) < rank(y); });
    return order;
}

std::vector<std::string> removed_names(const std::vector<Removal>& rs) {
    std::vector<std::string> out;
    for (const auto& r : rs) out.push_back(r.feature);
    return out;
}

FeatureSchema without(const FeatureSchema& s, const std::vector<Removal>& rs) {
    const auto drop = removed_names(rs);
    std::vector<std::string> keep;
    for (const auto& c : s.columns()) {
        if (std::find(drop.begin(), drop.end(), c.name) == drop.end()) keep.push_back(c.name);
    }
    return s.select(keep);
}

}  // namespace

std::optional<double> pearson(const FeatureMatrix& m, std::size_t a, std::size_t b) {
    std::size_t n = 0;
    double sa = 0.0, sb = 0.0;
    for (const auto& r : m.rows) {
        if (r.values[a] && r.values[b]) {
            sa += *r.values[a];
            sb += *r.values[b];
            ++n;
        }
    }
    if (n < 2) return std::nullopt;
    const double ma = sa / static_cast<double>(n);
    const double mb = sb / static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (const auto& r : m.rows) {
        if (r.values[a] && r.values[b]) {
            const double da = *r.values[a] - ma;
            const double db = *r.values[b] - mb;
            sab += da * db;
            saa += da * da;
            sbb += db * db;
        }
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double column_variance(const FeatureMatrix& m, std::size_t col) {
    const auto xs = m.column_values(col);
    if (xs.empty()) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size());
}

std::vector<Removal> prune_linear_combinations(const FeatureMatrix& m, const std::vector<LinearRule>& rules) {
    if (m.size() < 2) {
        throw Error(ErrorCode::PreconditionFailed, "linear-combination check needs at least 2 rows");
    }
    std::vector<Removal> out;
    for (const auto& rule : rules) {
        const auto target = m.schema.index_of(rule.target);
        if (!target) continue;
        std::vector<std::size_t> parents;
        for (const auto& p : rule.parents) {
            const auto at = m.schema.index_of(p);
            if (!at) throw Error(ErrorCode::SumMismatch, fmt::format("{}: parent {} missing from schema", rule.target, p));
            parents.push_back(*at);
        }
        for (std::size_t row = 0; row < m.size(); ++row) {
            const auto& v = m.rows[row].values;
            double sum = 0.0;
            bool complete = v[*target].has_value();
            for (std::size_t p : parents) {
                complete = complete && v[p].has_value();
                if (v[p]) sum += *v[p];
            }
            if (!complete || *v[*target] != sum) {
                throw Error(ErrorCode::SumMismatch,
                            fmt::format("{} != sum of parents at row {} (session {})", rule.target, row, m.session_id(row)));
            }
        }
        std::string parent_list;
        for (const auto& p : rule.parents) parent_list += (parent_list.empty() ? "" : " + ") + p;
        out.push_back(Removal{rule.target, PruneReason::Linear, parent_list, static_cast<double>(m.size()),
                              fmt::format("{} = {} on all {} rows", rule.target, parent_list, m.size())});
    }
    return out;
}

std::vector<Removal> prune_correlated(const FeatureMatrix& m, double threshold) {
    if (m.size() < 3) throw Error(ErrorCode::PreconditionFailed, "correlation check needs at least 3 rows");
    std::vector<Removal> out;
    std::vector<std::size_t> kept;
    for (std::size_t j : scan_order(m.schema)) {
        if (!is_numeric(m.schema, j)) continue;
        bool dropped = false;
        for (std::size_t i : kept) {
            const auto r = pearson(m, i, j);
            if (r && std::abs(*r) >= threshold) {
                out.push_back(Removal{m.schema[j].name, PruneReason::Correlated, m.schema[i].name, *r,
                                      fmt::format("|r| = {:.6f} >= {} with {}", std::abs(*r), threshold,
                                                  m.schema[i].name)});
                dropped = true;
                break;
            }
        }
        if (!dropped) kept.push_back(j);
    }
    return out;
}

std::vector<Removal> prune_low_variance(const FeatureMatrix& m, double epsilon) {
    if (m.size() < 2) throw Error(ErrorCode::PreconditionFailed, "variance check needs at least 2 rows");
    std::vector<Removal> out;
    for (std::size_t j : scan_order(m.schema)) {
        if (!is_numeric(m.schema, j)) continue;
        const double var = column_variance(m, j);
        if (var <= epsilon) {
            out.push_back(Removal{m.schema[j].name, PruneReason::LowVariance, "", var,
                                  fmt::format("variance {:.6g} <= {:g}", var, epsilon)});
        }
    }
    return out;
}

std::vector<Removal> prune_derived(const FeatureSchema& schema, const std::vector<DerivedRule>& rules) {
    std::vector<Removal> out;
    for (const auto& rule : rules) {
        if (!schema.contains(rule.feature)) continue;
        out.push_back(Removal{rule.feature, PruneReason::Derived, rule.source, 0.0,
                              fmt::format("declared derivable from {}", rule.source)});
    }
    return out;
}

PruneReport validate_features(const FeatureMatrix& m, const PruneConfig& config) {
    m.check();
    PruneReport report;
    FeatureMatrix current = m;

    auto absorb = [&](std::vector<Removal> stage) {
        if (stage.empty()) return;
        current = current.project(without(current.schema, stage));
        for (auto& r : stage) report.removed.push_back(std::move(r));
    };
    absorb(prune_linear_combinations(current, config.linear_rules));
    absorb(prune_correlated(current, config.correlation_threshold));
    absorb(prune_low_variance(current, config.variance_epsilon));
    absorb(prune_derived(current.schema, config.derived_rules));
    report.kept = current.schema;
    return report;
}

FeatureMatrix apply_prune(const PruneReport& report, const FeatureMatrix& m) { return m.project(report.kept); }

std::string PruneReport::to_text() const {
    std::string out = fmt::format("# feature validation: {} removed, {} kept (schema {})\n", removed.size(),
                                  kept.size(), kept.version());
    out += "removed\treason\tpartner\tvalue\tevidence\n";
    for (const auto& r : removed) {
        out += fmt::format("{}\t{}\t{}\t{:.9g}\t{}\n", r.feature, static_cast<char>(r.reason),
                           r.partner.empty() ? "-" : r.partner, r.value, r.evidence);
    }
    out += "kept\tkind\tunits\n";
    for (const auto& c : kept.columns()) out += fmt::format("{}\t{}\t{}\n", c.name, to_string(c.kind), c.units);
    return out;
}

}  // namespace iotid
