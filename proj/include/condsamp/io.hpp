#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "condsamp/ccgan.hpp"
#include "condsamp/errors.hpp"
#include "condsamp/manifold.hpp"
#include "condsamp/sde.hpp"

// File formats.
//
// CSV: decimal floats with 17 significant digits (round-trip exact for
// doubles), one header line.
//
// Binary model container: an 8-byte magic string, a u64 little-endian JSON
// header length, the JSON header bytes, then the data blocks in the order
// listed in the header's "blocks" array. Each block is a u64 little-endian
// byte length followed by raw little-endian float64 values (matrices
// row-major).
//
// All files are written to a temporary name and renamed into place, so an
// interrupted run never leaves a partial artifact at the final path.

namespace condsamp {

namespace io {

using nlohmann::json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Write `content` to `path` atomically (temp file + rename).
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string csv_from_matrix(const std::vector<std::string>& header,
                                   const Eigen::MatrixXd& m) {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) out += ',';
        out += header[c];
    }
    out += '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header, const Eigen::MatrixXd& m) {
    if (static_cast<Eigen::Index>(header.size()) != m.cols())
        throw Error("write_csv: header width != column count");
    atomic_write(path, csv_from_matrix(header, m));
}

struct CsvData {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

inline CsvData read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    CsvData out;
    std::string line;
    if (!std::getline(in, line)) throw Error("empty CSV: " + path.string());
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.header.push_back(cell);
    }
    std::vector<double> vals;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        Eigen::Index cols = 0;
        while (std::getline(ss, cell, ',')) {
            vals.push_back(std::stod(cell));
            ++cols;
        }
        if (cols != static_cast<Eigen::Index>(out.header.size()))
            throw Error("ragged CSV row in " + path.string());
        ++rows;
    }
    out.values.resize(rows, static_cast<Eigen::Index>(out.header.size()));
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < out.values.cols(); ++j)
            out.values(i, j) = vals[static_cast<std::size_t>(i * out.values.cols() + j)];
    return out;
}

/// Trajectory CSV (t, x1..xdim) plus sidecar metadata JSON at path + ".meta.json".
inline void save_trajectory(const std::filesystem::path& path, const Trajectory& traj,
                            const std::map<std::string, double>& params) {
    Eigen::MatrixXd m(traj.states.rows(), traj.states.cols() + 1);
    for (Eigen::Index i = 0; i < traj.states.rows(); ++i) m(i, 0) = traj.dt * static_cast<double>(i);
    m.rightCols(traj.states.cols()) = traj.states;
    std::vector<std::string> header{"t"};
    for (Eigen::Index c = 0; c < traj.states.cols(); ++c)
        header.push_back("x" + std::to_string(c + 1));
    write_csv(path, header, m);
    json meta{{"system_id", traj.system_id},
              {"params", params},
              {"dt", traj.dt},
              {"seed", traj.seed},
              {"n_steps", traj.states.rows() - 1}};
    atomic_write(path.string() + ".meta.json", meta.dump(2) + "\n");
}

namespace detail {

inline void append_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline std::uint64_t take_u64(const std::string& s, std::size_t& at) {
    if (at + 8 > s.size()) throw Error("model file truncated");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at + b])) << (8 * b);
    at += 8;
    return v;
}

inline void append_block(std::string& out, const double* data, std::size_t count) {
    append_u64(out, count * sizeof(double));
    out.append(reinterpret_cast<const char*>(data), count * sizeof(double));
}

inline std::vector<double> take_block(const std::string& s, std::size_t& at) {
    const std::uint64_t bytes = take_u64(s, at);
    if (at + bytes > s.size() || bytes % sizeof(double) != 0)
        throw Error("model file truncated or misaligned block");
    std::vector<double> v(bytes / sizeof(double));
    std::memcpy(v.data(), s.data() + at, bytes);
    at += bytes;
    return v;
}

inline void append_matrix(std::string& out, const Eigen::MatrixXd& m) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    append_block(out, rm.data(), static_cast<std::size_t>(rm.size()));
}

inline Eigen::MatrixXd take_matrix(const std::string& s, std::size_t& at, Eigen::Index rows,
                                   Eigen::Index cols) {
    const std::vector<double> v = take_block(s, at);
    if (static_cast<Eigen::Index>(v.size()) != rows * cols)
        throw Error("model file block has unexpected size");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
    return m;
}

}  // namespace detail

inline void save_dmap(const std::filesystem::path& path, const DmapModel& model) {
    json header{{"metric", model.metric == DmapMetric::euclidean ? "euclidean" : "mahalanobis"},
                {"eps_kernel", model.eps_kernel},
                {"alpha", model.alpha},
                {"n_train", model.n_train()},
                {"dim", model.point_dim()},
                {"n_eigs", model.eigvals.size()},
                {"has_covs", !model.local_covs.empty()},
                {"blocks", {"train_points", "eigvals", "eigvecs", "degree", "local_covs"}}};
    std::string out = "CSDMAP01";
    const std::string hs = header.dump();
    detail::append_u64(out, hs.size());
    out += hs;
    detail::append_matrix(out, model.train_points);
    detail::append_matrix(out, model.eigvals);
    detail::append_matrix(out, model.eigvecs);
    detail::append_matrix(out, model.degree);
    Eigen::MatrixXd covs(model.local_covs.size(),
                         model.point_dim() * model.point_dim());
    for (std::size_t i = 0; i < model.local_covs.size(); ++i) {
        const Eigen::MatrixXd& c = model.local_covs[i];
        for (Eigen::Index r = 0; r < c.rows(); ++r)
            for (Eigen::Index q = 0; q < c.cols(); ++q) covs(i, r * c.cols() + q) = c(r, q);
    }
    detail::append_matrix(out, covs);
    atomic_write(path, out);
}

inline DmapModel load_dmap(const std::filesystem::path& path) {
    const std::string s = read_file(path);
    if (s.substr(0, 8) != "CSDMAP01") throw Error("not a dmap model file: " + path.string());
    std::size_t at = 8;
    const std::uint64_t hlen = detail::take_u64(s, at);
    const json header = json::parse(s.substr(at, hlen));
    at += hlen;
    DmapModel m;
    m.metric = header.at("metric") == "euclidean" ? DmapMetric::euclidean
                                                  : DmapMetric::mahalanobis;
    m.eps_kernel = header.at("eps_kernel");
    m.alpha = header.at("alpha");
    const Eigen::Index n = header.at("n_train");
    const Eigen::Index dim = header.at("dim");
    const Eigen::Index k = header.at("n_eigs");
    m.train_points = detail::take_matrix(s, at, n, dim);
    m.eigvals = detail::take_matrix(s, at, k, 1);
    m.eigvecs = detail::take_matrix(s, at, n, k);
    m.degree = detail::take_matrix(s, at, n, 1);
    const Eigen::MatrixXd covs =
        detail::take_matrix(s, at, header.at("has_covs") ? n : 0, dim * dim);
    m.deg_pow = m.degree.array().pow(-m.alpha / 2.0);
    if (covs.rows() > 0) {
        m.local_covs.resize(n);
        m.local_cov_pinv.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::MatrixXd c(dim, dim);
            for (Eigen::Index r = 0; r < dim; ++r)
                for (Eigen::Index q = 0; q < dim; ++q) c(r, q) = covs(i, r * dim + q);
            m.local_covs[i] = c;
            m.local_cov_pinv[i] = pinv_psd(c);
        }
    }
    return m;
}

namespace detail {

inline json net_header(const DenseNet& net) {
    json layers = json::array();
    for (const auto& l : net.layers) {
        json jl{{"in", l.in_dim()},
                {"out", l.out_dim()},
                {"act", static_cast<int>(l.act)},
                {"leaky_slope", l.leaky_slope},
                {"bn", l.bn.has_value()}};
        layers.push_back(jl);
    }
    return layers;
}

inline void append_net(std::string& out, const DenseNet& net) {
    for (const auto& l : net.layers) {
        append_matrix(out, l.weight);
        append_matrix(out, l.bias);
        if (l.bn) {
            append_matrix(out, l.bn->gamma);
            append_matrix(out, l.bn->beta);
            append_matrix(out, l.bn->running_mean);
            append_matrix(out, l.bn->running_var);
        }
    }
}

inline DenseNet take_net(const std::string& s, std::size_t& at, const json& layers) {
    DenseNet net;
    for (const auto& jl : layers) {
        DenseLayer l;
        const Eigen::Index in = jl.at("in"), out_dim = jl.at("out");
        l.act = static_cast<Activation>(jl.at("act").get<int>());
        l.leaky_slope = jl.at("leaky_slope");
        l.weight = take_matrix(s, at, in, out_dim);
        l.bias = take_matrix(s, at, out_dim, 1);
        if (jl.at("bn").get<bool>()) {
            BatchNormParams bn;
            bn.gamma = take_matrix(s, at, out_dim, 1);
            bn.beta = take_matrix(s, at, out_dim, 1);
            bn.running_mean = take_matrix(s, at, out_dim, 1);
            bn.running_var = take_matrix(s, at, out_dim, 1);
            l.bn = bn;
        }
        net.layers.push_back(std::move(l));
    }
    return net;
}

}  // namespace detail

inline void save_gan(const std::filesystem::path& path, const GanModel& model) {
    json header{{"arch_id", model.arch_id},
                {"noise_dim", model.noise_dim},
                {"data_dim", model.data_dim},
                {"label_lo", model.label_lo},
                {"label_hi", model.label_hi},
                {"hvdl",
                 {{"kappa", model.hvdl.kappa_vicinity},
                  {"sigma", model.hvdl.sigma_label},
                  {"c1", model.hvdl.c1},
                  {"c2", model.hvdl.c2}}},
                {"generator", detail::net_header(model.generator)},
                {"discriminator", detail::net_header(model.discriminator)},
                {"blocks", {"data_shift", "data_scale", "generator", "discriminator"}}};
    std::string out = "CSGAN001";
    const std::string hs = header.dump();
    detail::append_u64(out, hs.size());
    out += hs;
    detail::append_matrix(out, model.data_shift);
    detail::append_matrix(out, model.data_scale);
    detail::append_net(out, model.generator);
    detail::append_net(out, model.discriminator);
    atomic_write(path, out);
}

inline GanModel load_gan(const std::filesystem::path& path) {
    const std::string s = read_file(path);
    if (s.substr(0, 8) != "CSGAN001") throw Error("not a GAN model file: " + path.string());
    std::size_t at = 8;
    const std::uint64_t hlen = detail::take_u64(s, at);
    const json header = json::parse(s.substr(at, hlen));
    at += hlen;
    GanModel m;
    m.arch_id = header.at("arch_id");
    m.noise_dim = header.at("noise_dim");
    m.data_dim = header.at("data_dim");
    m.label_lo = header.at("label_lo");
    m.label_hi = header.at("label_hi");
    m.hvdl.kappa_vicinity = header.at("hvdl").at("kappa");
    m.hvdl.sigma_label = header.at("hvdl").at("sigma");
    m.hvdl.c1 = header.at("hvdl").at("c1");
    m.hvdl.c2 = header.at("hvdl").at("c2");
    m.data_shift = detail::take_matrix(s, at, m.data_dim, 1);
    m.data_scale = detail::take_matrix(s, at, m.data_dim, 1);
    m.generator = detail::take_net(s, at, header.at("generator"));
    m.discriminator = detail::take_net(s, at, header.at("discriminator"));
    return m;
}

}  // namespace io

}  // namespace condsamp
