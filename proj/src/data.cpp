#include "odecast/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "odecast/errors.hpp"
#include "odecast/rng.hpp"

namespace odecast {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

// Accepts "YYYY-MM-DD HH:MM[:SS]" or plain numeric timestamps. Returns
// seconds; only spacing is used downstream.
std::optional<double> parse_timestamp(const std::string& s) {
    int y, mo, d, h = 0, mi = 0, sec = 0;
    char sep;
    std::istringstream in(s);
    if (s.find('-') != std::string::npos) {
        in >> y >> sep >> mo >> sep >> d;
        if (in.fail()) return std::nullopt;
        if (!in.eof()) {
            in >> h >> sep >> mi;
            if (in.fail()) return std::nullopt;
            if (in.peek() == ':') in >> sep >> sec;
        }
        // days since a fixed epoch via civil-day arithmetic (proleptic Gregorian)
        const int yy = y - (mo <= 2 ? 1 : 0);
        const int era = (yy >= 0 ? yy : yy - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(yy - era * 400);
        const unsigned doy = (153u * (mo + (mo > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        const long days = era * 146097L + static_cast<long>(doe) - 719468L;
        return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
    }
    double v;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace

RawSeries load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);

    std::string header;
    if (!std::getline(in, header)) throw DataError("empty file: " + path);
    const std::vector<std::string> columns = split_csv_line(header);

    auto column_index = [&](const std::string& name) -> std::size_t {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end())
            throw DataError("column '" + name + "' not found in " + path);
        return static_cast<std::size_t>(it - columns.begin());
    };

    const std::size_t ts_col = column_index(schema.timestamp_column);
    std::vector<std::string> feature_names = schema.feature_columns;
    if (feature_names.empty()) {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (i != ts_col) feature_names.push_back(columns[i]);
    }
    std::vector<std::size_t> feature_cols;
    for (const std::string& name : feature_names) feature_cols.push_back(column_index(name));

    const std::string target = schema.target_column.empty() ? feature_names.back()
                                                            : schema.target_column;
    auto target_it = std::find(feature_names.begin(), feature_names.end(), target);
    if (target_it == feature_names.end())
        throw DataError("target column '" + target + "' is not among the features");

    RawSeries series;
    series.feature_names = feature_names;
    series.target_index = static_cast<std::size_t>(target_it - feature_names.begin());

    std::vector<std::string> bad_lines;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != columns.size()) {
            bad_lines.push_back(std::to_string(line_no) + " (field count)");
            continue;
        }
        const std::optional<double> ts = parse_timestamp(fields[ts_col]);
        if (!ts) {
            bad_lines.push_back(std::to_string(line_no) + " (timestamp)");
            continue;
        }
        std::vector<double> row;
        row.reserve(feature_cols.size());
        bool row_ok = true;
        for (std::size_t c : feature_cols) {
            const std::optional<double> v = parse_number(fields[c]);
            if (!v) {
                bad_lines.push_back(std::to_string(line_no) + " (column '" + columns[c] + "')");
                row_ok = false;
                break;
            }
            row.push_back(*v);
        }
        if (!row_ok) continue;
        series.timestamps.push_back(*ts);
        series.values.push_back(std::move(row));
    }

    if (!bad_lines.empty()) {
        std::string msg = "unparseable rows in " + path + " at lines: ";
        for (std::size_t i = 0; i < bad_lines.size() && i < 10; ++i) {
            if (i) msg += ", ";
            msg += bad_lines[i];
        }
        if (bad_lines.size() > 10) msg += ", ...";
        throw DataError(msg);
    }
    if (series.values.empty()) throw DataError("no data rows in " + path);

    // sort on timestamp if the file is not already chronological
    bool sorted = true;
    for (std::size_t i = 1; i < series.timestamps.size(); ++i)
        if (series.timestamps[i] < series.timestamps[i - 1]) {
            sorted = false;
            break;
        }
    if (!sorted) {
        std::vector<std::size_t> order(series.timestamps.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return series.timestamps[a] < series.timestamps[b];
        });
        RawSeries sorted_series = series;
        for (std::size_t i = 0; i < order.size(); ++i) {
            sorted_series.timestamps[i] = series.timestamps[order[i]];
            sorted_series.values[i] = series.values[order[i]];
        }
        series = std::move(sorted_series);
    }
    return series;
}

std::pair<RawSeries, RawSeries> split_chronological(const RawSeries& series,
                                                    double train_fraction) {
    if (series.length() < 8) throw DataError("series too short to split");
    const std::size_t cut = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(series.length())));
    if (cut == 0 || cut >= series.length())
        throw DataError("degenerate chronological split");

    auto take = [&](std::size_t from, std::size_t to) {
        RawSeries part;
        part.feature_names = series.feature_names;
        part.target_index = series.target_index;
        part.timestamps.assign(series.timestamps.begin() + from, series.timestamps.begin() + to);
        part.values.assign(series.values.begin() + from, series.values.begin() + to);
        return part;
    };
    return {take(0, cut), take(cut, series.length())};
}

NormalizationStats fit_scaler(const RawSeries& train) {
    const std::size_t d = train.dims();
    const std::size_t n = train.length();
    if (n == 0) throw DataError("cannot fit scaler on empty series");
    NormalizationStats stats;
    stats.mean.assign(d, 0.0);
    stats.stddev.assign(d, 0.0);
    for (const auto& row : train.values)
        for (std::size_t j = 0; j < d; ++j) stats.mean[j] += row[j];
    for (std::size_t j = 0; j < d; ++j) stats.mean[j] /= static_cast<double>(n);
    for (const auto& row : train.values)
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = row[j] - stats.mean[j];
            stats.stddev[j] += diff * diff;
        }
    for (std::size_t j = 0; j < d; ++j) {
        stats.stddev[j] = std::sqrt(stats.stddev[j] / static_cast<double>(n));
        if (stats.stddev[j] <= 1e-12)
            throw DataError("feature '" + train.feature_names[j] +
                            "' has (near-)zero variance on the training prefix");
    }
    return stats;
}

RawSeries apply_scaler(const NormalizationStats& stats, const RawSeries& series) {
    if (stats.mean.size() != series.dims())
        throw DataError("scaler dimensionality does not match series");
    RawSeries out = series;
    for (auto& row : out.values)
        for (std::size_t j = 0; j < row.size(); ++j)
            row[j] = (row[j] - stats.mean[j]) / stats.stddev[j];
    return out;
}

std::vector<Window> make_windows(const RawSeries& series, std::size_t lag, std::size_t horizon,
                                 const std::vector<std::size_t>& target_dims) {
    if (series.length() < lag + horizon)
        throw DataError("series shorter than lag + horizon");
    const std::size_t d = series.dims();
    std::vector<Window> windows;
    windows.reserve(series.length() - lag - horizon + 1);
    for (std::size_t end = lag - 1; end + horizon < series.length(); ++end) {
        Window w;
        std::vector<double> flat(lag * d);
        for (std::size_t i = 0; i < lag; ++i)
            for (std::size_t j = 0; j < d; ++j)
                flat[i * d + j] = series.values[end - lag + 1 + i][j];
        w.inputs = Tensor::from_matrix(lag, d, std::move(flat));

        std::vector<double> tgt(horizon * target_dims.size());
        for (std::size_t h = 0; h < horizon; ++h)
            for (std::size_t j = 0; j < target_dims.size(); ++j)
                tgt[h * target_dims.size() + j] = series.values[end + 1 + h][target_dims[j]];
        w.targets = Tensor::from_matrix(horizon, target_dims.size(), std::move(tgt));

        const double t0 = series.timestamps[end - lag + 1];
        const double t1 = series.timestamps[end];
        std::vector<double> grid(lag);
        if (t1 <= t0) throw DataError("window timestamps are not increasing");
        for (std::size_t i = 0; i < lag; ++i)
            grid[i] = (series.timestamps[end - lag + 1 + i] - t0) / (t1 - t0);
        w.grid = TimeGrid(std::move(grid));
        w.end_row = end;
        windows.push_back(std::move(w));
    }
    return windows;
}

std::vector<Window> make_masked_windows(const MaskedSeries& masked, std::size_t lag,
                                        std::size_t horizon,
                                        const std::vector<std::size_t>& target_dims,
                                        std::size_t min_observed) {
    const RawSeries& series = masked.series;
    if (series.length() < lag + horizon)
        throw DataError("series shorter than lag + horizon");
    const std::size_t d = series.dims();
    std::vector<Window> windows;
    for (std::size_t end = lag - 1; end + horizon < series.length(); ++end) {
        std::vector<std::size_t> kept;
        for (std::size_t i = end + 1 - lag; i <= end; ++i) {
            bool any = false;
            for (std::size_t j = 0; j < d; ++j)
                if (masked.mask[i][j]) {
                    any = true;
                    break;
                }
            if (any) kept.push_back(i);
        }
        if (kept.size() < min_observed) continue;

        Window w;
        std::vector<double> flat(kept.size() * d, 0.0);
        std::vector<double> mask_flat(kept.size() * d, 0.0);
        for (std::size_t r = 0; r < kept.size(); ++r)
            for (std::size_t j = 0; j < d; ++j)
                if (masked.mask[kept[r]][j]) {
                    flat[r * d + j] = series.values[kept[r]][j];
                    mask_flat[r * d + j] = 1.0;
                }
        w.inputs = Tensor::from_matrix(kept.size(), d, std::move(flat));
        w.input_mask = Tensor::from_matrix(kept.size(), d, std::move(mask_flat));

        const std::size_t td = target_dims.size();
        std::vector<double> tgt(horizon * td, 0.0);
        std::vector<double> tgt_mask(horizon * td, 0.0);
        for (std::size_t h = 0; h < horizon; ++h)
            for (std::size_t j = 0; j < td; ++j)
                if (masked.mask[end + 1 + h][target_dims[j]]) {
                    tgt[h * td + j] = series.values[end + 1 + h][target_dims[j]];
                    tgt_mask[h * td + j] = 1.0;
                }
        w.targets = Tensor::from_matrix(horizon, td, std::move(tgt));
        w.target_mask = Tensor::from_matrix(horizon, td, std::move(tgt_mask));

        const double t0 = series.timestamps[kept.front()];
        const double t1 = series.timestamps[kept.back()];
        std::vector<double> grid(kept.size());
        if (kept.size() == 1) {
            grid[0] = 0.0;
        } else {
            if (t1 <= t0) throw DataError("window timestamps are not increasing");
            for (std::size_t r = 0; r < kept.size(); ++r)
                grid[r] = (series.timestamps[kept[r]] - t0) / (t1 - t0);
        }
        w.grid = TimeGrid(std::move(grid));
        w.end_row = end;
        windows.push_back(std::move(w));
    }
    return windows;
}

std::size_t MaskedSeries::observed_count(std::size_t dim) const {
    std::size_t n = 0;
    for (const auto& row : mask) n += row[dim] ? 1 : 0;
    return n;
}

MaskedSeries cutout_irregular(const RawSeries& series, double fraction, std::uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0)
        throw ContractError("cutout fraction must be in [0, 1)");
    MaskedSeries out;
    out.series = series;
    out.mask.assign(series.length(), std::vector<bool>(series.dims(), true));

    const std::size_t remove = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(series.length())));
    Rng rng(seed);
    for (std::size_t d = 0; d < series.dims(); ++d) {
        Rng attr = rng.fork(d + 1);
        // Fisher-Yates prefix to pick `remove` distinct indices
        std::vector<std::size_t> idx(series.length());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < remove; ++i) {
            const std::size_t j = i + attr.below(idx.size() - i);
            std::swap(idx[i], idx[j]);
            out.mask[idx[i]][d] = false;
        }
    }
    return out;
}

RawSeries synthesize(SyntheticKind kind, std::size_t length, const SyntheticParams& params,
                     std::uint64_t seed) {
    Rng rng(seed);
    RawSeries series;
    series.feature_names = {"value"};
    series.target_index = 0;
    series.timestamps.resize(length);
    series.values.resize(length);
    const std::size_t shift = params.shift_at == 0 ? length / 2 : params.shift_at;
    double walk = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
        series.timestamps[t] = static_cast<double>(t) * 3600.0; // hourly
        double v = 0.0;
        switch (kind) {
        case SyntheticKind::Sine:
            v = params.amplitude *
                std::sin(2.0 * M_PI * static_cast<double>(t) / params.period);
            break;
        case SyntheticKind::Constant:
            v = params.constant;
            break;
        case SyntheticKind::Step:
        case SyntheticKind::MeanShift:
            v = t < shift ? params.constant : params.shift_to;
            break;
        case SyntheticKind::RandomWalk:
            walk += params.walk_std * rng.normal();
            v = walk;
            break;
        }
        if (params.noise_std > 0.0 && kind != SyntheticKind::RandomWalk)
            v += params.noise_std * rng.normal();
        series.values[t] = {v};
    }
    return series;
}

namespace {

constexpr char kCacheMagic[8] = {'O', 'D', 'C', 'S', 'T', 'S', 'R', '1'};

struct CacheHasher {
    std::uint64_t state = 1469598103934665603ULL;
    void feed(const void* data, std::size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state ^= p[i];
            state *= 1099511628211ULL;
        }
    }
};

} // namespace

void save_series_cache(const RawSeries& series, const NormalizationStats& stats,
                       const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write series cache: " + path);
    CacheHasher hash;
    auto put = [&](const void* data, std::size_t n) {
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        hash.feed(data, n);
    };
    auto put_u64 = [&](std::uint64_t v) { put(&v, sizeof(v)); };
    auto put_str = [&](const std::string& s) {
        put_u64(s.size());
        put(s.data(), s.size());
    };

    put(kCacheMagic, sizeof(kCacheMagic));
    put_u64(1); // version
    put_u64(series.length());
    put_u64(series.dims());
    put_u64(series.target_index);
    for (const std::string& name : series.feature_names) put_str(name);
    put(series.timestamps.data(), series.timestamps.size() * sizeof(double));
    for (const auto& row : series.values) put(row.data(), row.size() * sizeof(double));
    put(stats.mean.data(), stats.mean.size() * sizeof(double));
    put(stats.stddev.data(), stats.stddev.size() * sizeof(double));
    const std::uint64_t checksum = hash.state;
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    if (!out) throw DataError("series cache write failed");
}

std::pair<RawSeries, NormalizationStats> load_series_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open series cache: " + path);
    CacheHasher hash;
    auto get = [&](void* data, std::size_t n) {
        in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (!in) throw DataError("series cache truncated");
        hash.feed(data, n);
    };
    auto get_u64 = [&]() {
        std::uint64_t v;
        get(&v, sizeof(v));
        return v;
    };
    auto get_str = [&]() {
        std::string s(get_u64(), '\0');
        get(s.data(), s.size());
        return s;
    };

    char magic[sizeof(kCacheMagic)];
    get(magic, sizeof(magic));
    if (std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
        throw DataError("not a series cache file");
    if (get_u64() != 1) throw DataError("unsupported series cache version");

    RawSeries series;
    const std::uint64_t rows = get_u64();
    const std::uint64_t dims = get_u64();
    series.target_index = get_u64();
    series.feature_names.resize(dims);
    for (auto& name : series.feature_names) name = get_str();
    series.timestamps.resize(rows);
    get(series.timestamps.data(), rows * sizeof(double));
    series.values.assign(rows, std::vector<double>(dims));
    for (auto& row : series.values) get(row.data(), dims * sizeof(double));

    NormalizationStats stats;
    stats.mean.resize(dims);
    stats.stddev.resize(dims);
    get(stats.mean.data(), dims * sizeof(double));
    get(stats.stddev.data(), dims * sizeof(double));

    const std::uint64_t expected = hash.state;
    std::uint64_t stored;
    in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (!in || stored != expected) throw DataError("series cache checksum mismatch");
    return {std::move(series), std::move(stats)};
}

RawSeries prepend_tail(const RawSeries& head, const RawSeries& tail, std::size_t rows) {
    if (rows > head.length()) throw DataError("prepend_tail: head shorter than requested rows");
    RawSeries out;
    out.feature_names = tail.feature_names;
    out.target_index = tail.target_index;
    const std::size_t from = head.length() - rows;
    out.timestamps.assign(head.timestamps.begin() + from, head.timestamps.end());
    out.values.assign(head.values.begin() + from, head.values.end());
    out.timestamps.insert(out.timestamps.end(), tail.timestamps.begin(), tail.timestamps.end());
    out.values.insert(out.values.end(), tail.values.begin(), tail.values.end());
    return out;
}

} // namespace odecast
