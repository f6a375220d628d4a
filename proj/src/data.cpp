#include "stabcp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "stabcp/errors.hpp"
#include "stabcp/rng.hpp"

namespace stabcp {

Eigen::MatrixXd ar1_covariance(Eigen::Index d, double rho) {
    if (d < 1) throw DataError("ar1_covariance: dimension must be positive");
    if (!(std::abs(rho) < 1.0)) throw DataError("ar1_covariance: |rho| must be below 1");
    Eigen::MatrixXd S(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) S(i, j) = std::pow(rho, std::abs(i - j));
    return S;
}

Eigen::VectorXd beta_vector(Eigen::Index d) {
    if (d < 2) throw DataError("beta_vector: degenerate beta, need d >= 2");
    Eigen::VectorXd raw(d);
    for (Eigen::Index j = 1; j <= d; ++j)
        raw(j - 1) = std::pow(1.0 - static_cast<double>(j) / static_cast<double>(d), 5.0);
    const double scale = std::sqrt(static_cast<double>(d) / raw.squaredNorm());
    return scale * raw;
}

std::pair<Dataset, Dataset> gen_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 1 || spec.m < 1) throw DataError("gen_synthetic: need at least one train and test row");
    if (spec.d < 1) throw DataError("gen_synthetic: dimension must be positive");
    if (spec.noise_sd < 0.0) throw DataError("gen_synthetic: negative noise scale");

    const Eigen::Index N = spec.n + spec.m;
    const Eigen::Index d = spec.d;
    const Eigen::MatrixXd L =
        Eigen::LLT<Eigen::MatrixXd>(ar1_covariance(d, spec.rho_ar)).matrixL();
    const double root_d = std::sqrt(static_cast<double>(d));

    Rng x_rng(derive_seed(spec.seed, 1));
    Rng noise_rng(derive_seed(spec.seed, 2));
    const Eigen::MatrixXd X = x_rng.normal_matrix(N, d) * L.transpose() / root_d;

    const Eigen::VectorXd beta = beta_vector(d);
    Eigen::VectorXd mu(N);
    if (spec.model == SignalModel::Linear) {
        mu = X * beta / root_d;
    } else {
        mu = (X / 10.0).array().exp().matrix() * beta / root_d;
    }
    const Eigen::VectorXd y = mu + spec.noise_sd * noise_rng.normal_vector(N);

    std::vector<std::string> names(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) names[static_cast<std::size_t>(j)] = "x" + std::to_string(j + 1);

    Dataset train{X.topRows(spec.n), y.head(spec.n), names, "y"};
    Dataset test{X.bottomRows(spec.m), y.tail(spec.m), names, "y"};
    return {std::move(train), std::move(test)};
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end != begin + s.size()) return false;
    return std::isfinite(out);
}

std::string row_list(const std::vector<Eigen::Index>& rows) {
    std::string s;
    const std::size_t shown = std::min<std::size_t>(rows.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
        if (i) s += ", ";
        s += std::to_string(rows[i]);
    }
    if (rows.size() > shown) s += ", and " + std::to_string(rows.size() - shown) + " more";
    return s;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& response_column) {
    std::ifstream in(path);
    if (!in) throw DataError("load_csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("load_csv: empty file " + path);
    const std::vector<std::string> header = split_fields(line);
    const std::size_t width = header.size();
    if (width == 0) throw DataError("load_csv: empty header in " + path);

    std::ptrdiff_t response_idx = -1;
    if (!response_column.empty()) {
        const auto it = std::find(header.begin(), header.end(), response_column);
        if (it == header.end())
            throw DataError("load_csv: response column '" + response_column + "' not found in " + path);
        response_idx = it - header.begin();
    }

    std::vector<std::vector<double>> rows;
    std::vector<Eigen::Index> bad_rows;
    Eigen::Index line_no = 1;  // header was line 1
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_fields(line);
        if (fields.size() != width)
            throw DataError("load_csv: line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " + std::to_string(width));
        std::vector<double> vals(width);
        bool ok = true;
        for (std::size_t c = 0; c < width; ++c)
            if (!parse_number(fields[c], vals[c])) ok = false;
        if (!ok) {
            bad_rows.push_back(line_no);
            continue;
        }
        rows.push_back(std::move(vals));
    }
    if (!bad_rows.empty())
        throw DataError("load_csv: missing or non-numeric values on lines " + row_list(bad_rows) +
                        " of " + path);
    if (rows.empty()) throw DataError("load_csv: no data rows in " + path);

    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index d = static_cast<Eigen::Index>(width) - (response_idx >= 0 ? 1 : 0);
    Dataset ds;
    ds.X.resize(n, d);
    if (response_idx >= 0) {
        ds.y.emplace(n);
        ds.response_name = header[static_cast<std::size_t>(response_idx)];
    }
    for (std::size_t c = 0; c < width; ++c) {
        if (static_cast<std::ptrdiff_t>(c) == response_idx) continue;
        ds.feature_names.push_back(header[c]);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index f = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (static_cast<std::ptrdiff_t>(c) == response_idx) {
                (*ds.y)(i) = rows[static_cast<std::size_t>(i)][c];
            } else {
                ds.X(i, f++) = rows[static_cast<std::size_t>(i)][c];
            }
        }
    }
    return ds;
}

namespace {

bool is_binary_column(const Eigen::VectorXd& col) {
    for (Eigen::Index i = 0; i < col.size(); ++i)
        if (col(i) != 0.0 && col(i) != 1.0) return false;
    return true;
}

Eigen::VectorXd normalize_column(const Eigen::VectorXd& col, const std::string& name) {
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().mean());
    if (sd == 0.0) throw DataError("zscore_normalize: column '" + name + "' has zero variance");
    return (col.array() - mean) / sd;
}

}  // namespace

Dataset zscore_normalize(const Dataset& ds) {
    Dataset out = ds;
    for (Eigen::Index c = 0; c < ds.X.cols(); ++c) {
        const std::string& name = ds.feature_names.size() > static_cast<std::size_t>(c)
                                      ? ds.feature_names[static_cast<std::size_t>(c)]
                                      : std::to_string(c);
        const Eigen::VectorXd col = ds.X.col(c);
        if (col.maxCoeff() == col.minCoeff())
            throw DataError("zscore_normalize: column '" + name + "' has zero variance");
        if (is_binary_column(col)) continue;  // 0/1 encodings stay as they are
        out.X.col(c) = normalize_column(col, name);
    }
    if (ds.y) {
        if (ds.y->maxCoeff() == ds.y->minCoeff())
            throw DataError("zscore_normalize: column '" + ds.response_name + "' has zero variance");
        if (!is_binary_column(*ds.y)) out.y = normalize_column(*ds.y, ds.response_name);
    }
    return out;
}

std::pair<Dataset, Dataset> holdout_split(const Dataset& ds, Eigen::Index m, std::uint64_t seed) {
    const Eigen::Index n = ds.X.rows();
    if (m < 1) throw DataError("holdout_split: need at least one test row");
    if (m >= n) throw DataError("holdout_split: holdout leaves an empty training set");

    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(derive_seed(seed, 3));
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index j =
            i + static_cast<Eigen::Index>(rng.integer(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    std::vector<Eigen::Index> test_rows(idx.begin(), idx.begin() + m);
    std::vector<Eigen::Index> train_rows(idx.begin() + m, idx.end());
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());

    auto take = [&](const std::vector<Eigen::Index>& rows) {
        Dataset part;
        part.feature_names = ds.feature_names;
        part.response_name = ds.response_name;
        part.X.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
        if (ds.y) part.y.emplace(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            part.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(rows[i]);
            if (ds.y) (*part.y)(static_cast<Eigen::Index>(i)) = (*ds.y)(rows[i]);
        }
        return part;
    };
    return {take(train_rows), take(test_rows)};
}

void write_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw DataError("write_csv: cannot open " + path + " for writing");
    const Eigen::Index d = ds.X.cols();
    for (Eigen::Index c = 0; c < d; ++c) {
        if (c) out << ',';
        out << (ds.feature_names.size() > static_cast<std::size_t>(c)
                    ? ds.feature_names[static_cast<std::size_t>(c)]
                    : "x" + std::to_string(c + 1));
    }
    if (ds.y) out << (d ? "," : "") << (ds.response_name.empty() ? "y" : ds.response_name);
    out << '\n';

    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        for (Eigen::Index c = 0; c < d; ++c) {
            if (c) out << ',';
            put(ds.X(i, c));
        }
        if (ds.y) {
            if (d) out << ',';
            put((*ds.y)(i));
        }
        out << '\n';
    }
    if (!out) throw DataError("write_csv: write failure on " + path);
}

}  // namespace stabcp
