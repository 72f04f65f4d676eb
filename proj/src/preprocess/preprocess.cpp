#include "iotid/preprocess.hpp"

#include "iotid/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <sstream>

namespace iotid {

NullDrop drop_nulls(const FeatureMatrix& m) {
    m.check();
    NullDrop out;
    out.matrix.schema = m.schema;
    out.missing_per_column.assign(m.schema.size(), 0);
    for (std::size_t r = 0; r < m.size(); ++r) {
        bool complete = true;
        for (std::size_t c = 0; c < m.schema.size(); ++c) {
            if (!m.rows[r].values[c]) {
                ++out.missing_per_column[c];
                complete = false;
            }
        }
        if (complete) {
            out.matrix.append(m.rows[r], m.labels[r]);
        } else {
            ++out.rows_dropped;
        }
    }
    if (!m.empty() && out.matrix.empty()) {
        throw Error(ErrorCode::AllRowsDropped, fmt::format("all {} rows contain Missing values", m.size()));
    }
    return out;
}

SplitSide SplitAssignment::side(const std::string& session_id) const {
    if (train_sessions.count(session_id)) return SplitSide::Train;
    if (test_sessions.count(session_id)) return SplitSide::Test;
    throw Error(ErrorCode::PreconditionFailed, "session " + session_id + " is not part of the split");
}

std::string SplitAssignment::to_text() const {
    std::string out = fmt::format("# seed={} train_fraction={}\n", seed, train_fraction);
    // One merged, sorted listing so the file diffing stays readable.
    std::map<std::string, const char*> all;
    for (const auto& s : train_sessions) all.emplace(s, "train");
    for (const auto& s : test_sessions) all.emplace(s, "test");
    for (const auto& [id, side] : all) out += fmt::format("{}\t{}\n", id, side);
    return out;
}

SplitAssignment SplitAssignment::parse(std::string_view text) {
    SplitAssignment split;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::istringstream header(line.substr(1));
            std::string tok;
            while (header >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = tok.substr(0, eq);
                const std::string val = tok.substr(eq + 1);
                if (key == "seed") split.seed = std::stoull(val);
                if (key == "train_fraction") split.train_fraction = std::stod(val);
            }
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error(ErrorCode::BadConfig, fmt::format("split line {}: no tab", line_no));
        const std::string id = line.substr(0, tab);
        const std::string side = line.substr(tab + 1);
        if (side == "train") {
            split.train_sessions.insert(id);
        } else if (side == "test") {
            split.test_sessions.insert(id);
        } else {
            throw Error(ErrorCode::BadConfig, fmt::format("split line {}: unknown side '{}'", line_no, side));
        }
        if (split.train_sessions.count(id) && split.test_sessions.count(id)) {
            throw Error(ErrorCode::LeakageDetected, "session " + id + " listed on both sides");
        }
    }
    return split;
}

SplitAssignment session_split(std::span<const SessionRef> sessions, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorCode::PreconditionFailed, fmt::format("train fraction {} outside (0, 1)", train_fraction));
    }
    std::map<std::string, std::vector<std::string>> by_label;
    std::set<std::string> seen;
    for (const auto& s : sessions) {
        if (seen.insert(s.session_id).second) by_label[s.device_label].push_back(s.session_id);
    }

    SplitAssignment split;
    split.seed = seed;
    split.train_fraction = train_fraction;
    for (auto& [label, ids] : by_label) {
        if (ids.size() < 2) {
            throw Error(ErrorCode::InsufficientSessions,
                        fmt::format("device {} has {} session(s); at least 2 are needed", label, ids.size()));
        }
        std::sort(ids.begin(), ids.end());
        Rng rng(derive_seed(seed, label));
        rng.shuffle(std::span(ids));
        const auto wanted = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(ids.size())));
        const std::size_t n_train = std::clamp<std::size_t>(wanted, 1, ids.size() - 1);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            (i < n_train ? split.train_sessions : split.test_sessions).insert(ids[i]);
        }
    }
    return split;
}

SplitAssignment session_split(const FeatureMatrix& m, double train_fraction, std::uint64_t seed) {
    std::vector<SessionRef> refs;
    refs.reserve(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) refs.push_back({m.session_id(i), m.labels[i]});
    return session_split(refs, train_fraction, seed);
}

TrainTest split_rows(const FeatureMatrix& m, const SplitAssignment& split) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto& id = m.session_id(i);
        if (split.train_sessions.count(id)) {
            train.push_back(i);
        } else if (split.test_sessions.count(id)) {
            test.push_back(i);
        }
    }
    TrainTest out{m.subset(train), m.subset(test)};
    assert_disjoint(out.train, out.test);
    return out;
}

void assert_disjoint(const FeatureMatrix& train, const FeatureMatrix& test) {
    std::set<std::string> train_ids;
    for (std::size_t i = 0; i < train.size(); ++i) train_ids.insert(train.session_id(i));
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (train_ids.count(test.session_id(i))) {
            throw Error(ErrorCode::LeakageDetected, "session " + test.session_id(i) + " on both sides of the split");
        }
    }
}

Scaler Scaler::fit(const FeatureMatrix& train) {
    train.check();
    Scaler s;
    s.schema_version_ = train.schema.version();
    for (std::size_t c = 0; c < train.schema.size(); ++c) {
        Column col;
        col.name = train.schema[c].name;
        col.kind = train.schema[c].kind;
        const auto xs = train.column_values(c);
        if (col.kind == FeatureKind::Numeric && !xs.empty()) {
            double sum = 0.0;
            for (double x : xs) sum += x;
            col.mean = sum / static_cast<double>(xs.size());
            double ss = 0.0;
            for (double x : xs) ss += (x - col.mean) * (x - col.mean);
            col.std = std::sqrt(ss / static_cast<double>(xs.size()));
            const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
            if (*lo == *hi) {
                // rounding in the mean must not turn a constant into noise
                col.mean = *lo;
                col.std = 0.0;
            }
            col.fill = col.mean;
        } else if (col.kind == FeatureKind::Categorical) {
            col.categories = xs;
            std::sort(col.categories.begin(), col.categories.end());
            col.categories.erase(std::unique(col.categories.begin(), col.categories.end()), col.categories.end());
        }
        s.columns_.push_back(std::move(col));
    }
    s.fitted_ = true;
    return s;
}

Scaler Scaler::from_columns(std::string schema_version, std::vector<Column> columns) {
    Scaler s;
    s.schema_version_ = std::move(schema_version);
    s.columns_ = std::move(columns);
    s.fitted_ = true;
    return s;
}

std::vector<std::string> Scaler::output_names() const {
    std::vector<std::string> out;
    for (const auto& c : columns_) {
        if (c.kind == FeatureKind::Categorical) {
            for (double cat : c.categories) out.push_back(fmt::format("{}={}", c.name, cat));
        } else {
            out.push_back(c.name);
        }
    }
    return out;
}

std::size_t Scaler::output_width() const {
    std::size_t n = 0;
    for (const auto& c : columns_) n += c.kind == FeatureKind::Categorical ? c.categories.size() : 1;
    return n;
}

void Scaler::transform_row(std::span<const FeatureValue> values, std::span<double> out) const {
    if (!fitted_) throw Error(ErrorCode::NotFitted, "scaler used before fit");
    if (values.size() != columns_.size() || out.size() != output_width()) {
        throw Error(ErrorCode::SchemaMismatch, fmt::format("row of {} values for a scaler fitted on {} columns",
                                                           values.size(), columns_.size()));
    }
    std::size_t o = 0;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const Column& col = columns_[c];
        switch (col.kind) {
        case FeatureKind::Numeric: {
            const double x = values[c].value_or(col.fill);
            out[o++] = col.std > 0.0 ? (x - col.mean) / col.std : 0.0;
            break;
        }
        case FeatureKind::Binary: out[o++] = values[c].value_or(0.0); break;
        case FeatureKind::Categorical:
            for (double cat : col.categories) out[o++] = values[c] && *values[c] == cat ? 1.0 : 0.0;
            break;
        }
    }
}

DenseMatrix Scaler::transform(const FeatureMatrix& m) const {
    if (!fitted_) throw Error(ErrorCode::NotFitted, "scaler used before fit");
    m.check();
    if (m.schema.size() != columns_.size()) {
        throw Error(ErrorCode::SchemaMismatch, "matrix columns differ from the fitted scaler");
    }
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        if (m.schema[c].name != columns_[c].name) {
            throw Error(ErrorCode::SchemaMismatch,
                        fmt::format("column {} is {} but scaler expects {}", c, m.schema[c].name, columns_[c].name));
        }
    }
    DenseMatrix out(m.size(), output_width());
    out.column_names = output_names();
    for (std::size_t r = 0; r < m.size(); ++r) transform_row(m.rows[r].values, out.row(r));
    return out;
}

FeatureMatrix oversample_balance(const FeatureMatrix& m, std::uint64_t seed, std::span<const std::string> required_labels) {
    if (m.empty()) throw Error(ErrorCode::EmptyClass, "no rows to balance");
    for (const auto& label : required_labels) {
        if (std::find(m.labels.begin(), m.labels.end(), label) == m.labels.end()) {
            throw Error(ErrorCode::EmptyClass, "class " + label + " has no rows");
        }
    }
    const auto picks = oversample_indices<std::string>(m.labels, seed);
    return m.subset(picks);
}

}  // namespace iotid
