#pragma once

#include "gmmn_garch/core.hpp"
#include "gmmn_garch/dependence.hpp"
#include "gmmn_garch/forecasting.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace gmmn_garch {

/// Model store failure: wrong magic, unsupported version, truncation or corrupt payload.
class FormatError : public InputError {
public:
    using InputError::InputError;
};

inline constexpr std::array<char, 8> kModelMagic{'G', 'M', 'G', 'A', 'R', 'C', 'H', '\0'};
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::uint32_t kFloatWidth = 64;

/// A fitted model plus the provenance it was produced under.
struct ModelArtifact {
    MtsModel model;
    std::string config_hash;
    std::uint64_t seed = 0;
};

namespace detail {

/// Little-endian byte writer.
class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void boolean(bool b) { u8(b ? 1 : 0); }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    void doubles(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    void ints(const std::vector<int>& v) {
        u64(v.size());
        for (int x : v) i64(x);
    }
    void matrix(const Matrix& m) {
        i64(m.rows());
        i64(m.cols());
        for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
    }
    void vector(const Vector& v) {
        i64(v.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }
    void raw(const char* p, std::size_t n) { buf_.append(p, n); }

    [[nodiscard]] const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view bytes) : p_(bytes) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(p_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    bool boolean() {
        const auto b = u8();
        if (b > 1) throw FormatError("model store: corrupt boolean");
        return b == 1;
    }
    std::size_t count(std::size_t element_bytes) {
        const std::uint64_t n = u64();
        if (element_bytes && n > (p_.size() - pos_) / element_bytes) throw FormatError("model store: truncated file");
        return static_cast<std::size_t>(n);
    }
    std::string str() {
        const auto n = count(1);
        need(n);
        std::string s(p_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::vector<double> doubles() {
        std::vector<double> v(count(8));
        for (double& x : v) x = f64();
        return v;
    }
    std::vector<int> ints() {
        std::vector<int> v(count(8));
        for (int& x : v) x = static_cast<int>(i64());
        return v;
    }
    Matrix matrix() {
        const auto r = i64(), c = i64();
        if (r < 0 || c < 0 || (r && c && static_cast<std::uint64_t>(c) > (p_.size() - pos_) / 8 / static_cast<std::uint64_t>(r)))
            throw FormatError("model store: truncated file");
        Matrix m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
        return m;
    }
    Vector vector() {
        const auto n = i64();
        if (n < 0 || static_cast<std::uint64_t>(n) > (p_.size() - pos_) / 8) throw FormatError("model store: truncated file");
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = f64();
        return v;
    }
    void raw(char* out, std::size_t n) {
        need(n);
        std::memcpy(out, p_.data() + pos_, n);
        pos_ += n;
    }
    [[nodiscard]] bool done() const { return pos_ == p_.size(); }

private:
    void need(std::size_t n) const {
        if (p_.size() - pos_ < n) throw FormatError("model store: truncated file");
    }
    std::string_view p_;
    std::size_t pos_ = 0;
};

enum : std::uint8_t { kTagIndependence = 0, kTagEmpirical = 1, kTagEmpiricalBeta = 2, kTagGmmn = 3, kTagMixture = 4 };

inline void write_sample(Writer& w, const PseudoSample& s) {
    w.matrix(s.u);
    w.i64(s.ranks.rows());
    w.i64(s.ranks.cols());
    for (Eigen::Index i = 0; i < s.ranks.size(); ++i) w.i64(s.ranks.data()[i]);
}

inline PseudoSample read_sample(Reader& r) {
    PseudoSample s;
    s.u = r.matrix();
    const auto rows = r.i64(), cols = r.i64();
    if (rows != s.u.rows() || cols != s.u.cols()) throw FormatError("model store: rank table does not match sample");
    s.ranks.resize(rows, cols);
    for (Eigen::Index i = 0; i < s.ranks.size(); ++i) s.ranks.data()[i] = static_cast<int>(r.i64());
    return s;
}

inline void write_quantiles(Writer& w, const std::vector<EmpiricalQuantile>& q) {
    w.u64(q.size());
    for (const auto& t : q) w.doubles(t.sorted());
}

inline std::vector<EmpiricalQuantile> read_quantiles(Reader& r) {
    std::vector<EmpiricalQuantile> q(r.count(8));
    for (auto& t : q) t = EmpiricalQuantile::from_sorted(r.doubles());
    return q;
}

inline void write_gmmn(Writer& w, const GmmnModel& m) {
    w.ints(m.layer_dims);
    for (const auto& x : m.weights) w.matrix(x);
    for (const auto& x : m.biases) w.vector(x);
    for (const auto& x : m.bn_scale) w.vector(x);
    for (const auto& x : m.bn_shift) w.vector(x);
    for (const auto& x : m.running_mean) w.vector(x);
    for (const auto& x : m.running_var) w.vector(x);
    w.f64(m.bn_momentum);
    w.f64(m.bn_epsilon);
    w.f64(m.dropout_rate);
    w.doubles(m.kernel.bandwidths);
    w.u64(m.seed);
}

inline GmmnModel read_gmmn(Reader& r) {
    auto dims = r.ints();
    if (dims.size() < 3 || dims.size() > 64) throw FormatError("model store: invalid GMMN layer list");
    GmmnModel m;
    m.layer_dims = std::move(dims);
    const std::size_t L = m.layer_dims.size();
    const auto expect = [](bool ok) {
        if (!ok) throw FormatError("model store: GMMN tensor has the wrong shape");
    };
    for (std::size_t l = 1; l < L; ++l) {
        m.weights.push_back(r.matrix());
        expect(m.weights.back().rows() == m.layer_dims[l] && m.weights.back().cols() == m.layer_dims[l - 1]);
    }
    for (std::size_t l = 1; l < L; ++l) {
        m.biases.push_back(r.vector());
        expect(m.biases.back().size() == m.layer_dims[l]);
    }
    for (auto* group : {&m.bn_scale, &m.bn_shift, &m.running_mean, &m.running_var}) {
        for (std::size_t l = 1; l + 1 < L; ++l) {
            group->push_back(r.vector());
            expect(group->back().size() == m.layer_dims[l]);
        }
    }
    m.bn_momentum = r.f64();
    m.bn_epsilon = r.f64();
    m.dropout_rate = r.f64();
    m.kernel.bandwidths = r.doubles();
    m.seed = r.u64();
    return m;
}

inline void write_dependence(Writer& w, const DependenceModel& d) {
    std::visit(
        [&w](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IndependenceCopula>) {
                w.u8(kTagIndependence);
                w.i64(m.dim);
            } else if constexpr (std::is_same_v<T, EmpiricalCopula>) {
                w.u8(kTagEmpirical);
                write_sample(w, m.sample);
            } else if constexpr (std::is_same_v<T, EmpiricalBetaCopula>) {
                w.u8(kTagEmpiricalBeta);
                write_sample(w, m.sample);
            } else if constexpr (std::is_same_v<T, GmmnCopula>) {
                w.u8(kTagGmmn);
                write_gmmn(w, m.model);
            } else {
                w.u8(kTagMixture);
                w.u64(m.components.size());
                for (const auto& c : m.components) write_dependence(w, c);
                w.u64(m.component_quantiles.size());
                for (const auto& q : m.component_quantiles) write_quantiles(w, q);
            }
        },
        d.variant());
}

inline DependenceModel read_dependence(Reader& r, int depth = 0) {
    if (depth > 4) throw FormatError("model store: mixture nesting too deep");
    switch (r.u8()) {
        case kTagIndependence: return IndependenceCopula{static_cast<int>(r.i64())};
        case kTagEmpirical: return EmpiricalCopula{read_sample(r)};
        case kTagEmpiricalBeta: return EmpiricalBetaCopula{read_sample(r)};
        case kTagGmmn: return GmmnCopula{read_gmmn(r)};
        case kTagMixture: {
            BootstrapMixture mix;
            const auto n = r.count(1);
            for (std::size_t b = 0; b < n; ++b) mix.components.push_back(read_dependence(r, depth + 1));
            const auto nq = r.count(8);
            for (std::size_t b = 0; b < nq; ++b) mix.component_quantiles.push_back(read_quantiles(r));
            if (nq != n) throw FormatError("model store: mixture needs one quantile set per component");
            return mix;
        }
        default: throw FormatError("model store: unknown dependence tag");
    }
}

inline void write_margin(Writer& w, const MarginalFitResult& m) {
    const auto& p = m.params;
    w.f64(p.mu);
    w.doubles(p.phi);
    w.doubles(p.gamma);
    w.f64(p.omega);
    w.doubles(p.alpha);
    w.doubles(p.beta);
    w.f64(p.nu);
    w.doubles(m.filter.mu_t);
    w.doubles(m.filter.sigma2_t);
    w.doubles(m.filter.z_t);
    w.f64(m.loglik);
    w.boolean(m.converged);
    w.f64(m.base_variance);
}

inline MarginalFitResult read_margin(Reader& r) {
    MarginalFitResult m;
    auto& p = m.params;
    p.mu = r.f64();
    p.phi = r.doubles();
    p.gamma = r.doubles();
    p.omega = r.f64();
    p.alpha = r.doubles();
    p.beta = r.doubles();
    p.nu = r.f64();
    m.filter.mu_t = r.doubles();
    m.filter.sigma2_t = r.doubles();
    m.filter.z_t = r.doubles();
    m.loglik = r.f64();
    m.converged = r.boolean();
    m.base_variance = r.f64();
    return m;
}

}  // namespace detail

/// Encodes a fitted model: magic, version, float width, provenance, then the payload.
inline std::string encode_model(const ModelArtifact& a) {
    detail::Writer w;
    w.raw(kModelMagic.data(), kModelMagic.size());
    w.u32(kModelVersion);
    w.u32(kFloatWidth);
    w.str(a.config_hash);
    w.u64(a.seed);
    const MtsModel& m = a.model;
    w.i64(m.tau);
    w.u64(m.margins.size());
    for (const auto& f : m.margins) detail::write_margin(w, f);
    w.matrix(m.pca.gamma);
    w.doubles(m.pca.lambdas);
    w.i64(m.pca.k);
    w.matrix(m.pca.upsilon);
    w.boolean(m.pca.reduced);
    w.u8(m.quantile_mode == QuantileMode::Parametric ? 0 : 1);
    detail::write_quantiles(w, m.quantiles);
    detail::write_dependence(w, m.dependence);
    return w.bytes();
}

inline ModelArtifact decode_model(std::string_view bytes) {
    detail::Reader r(bytes);
    std::array<char, 8> magic{};
    try {
        r.raw(magic.data(), magic.size());
    } catch (const FormatError&) {
        throw FormatError("model store: not a model file");
    }
    if (magic != kModelMagic) throw FormatError("model store: not a model file");
    const auto version = r.u32();
    if (version != kModelVersion)
        throw FormatError("model store: unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kModelVersion) + ")");
    if (r.u32() != kFloatWidth) throw FormatError("model store: unsupported float width");
    ModelArtifact a;
    a.config_hash = r.str();
    a.seed = r.u64();
    MtsModel& m = a.model;
    m.tau = static_cast<int>(r.i64());
    const auto n = r.count(1);
    for (std::size_t j = 0; j < n; ++j) m.margins.push_back(detail::read_margin(r));
    m.pca.gamma = r.matrix();
    m.pca.lambdas = r.doubles();
    m.pca.k = static_cast<int>(r.i64());
    m.pca.upsilon = r.matrix();
    m.pca.reduced = r.boolean();
    const auto mode = r.u8();
    if (mode > 1) throw FormatError("model store: unknown quantile mode");
    m.quantile_mode = mode == 0 ? QuantileMode::Parametric : QuantileMode::Empirical;
    m.quantiles = detail::read_quantiles(r);
    m.dependence = detail::read_dependence(r);
    if (!r.done()) throw FormatError("model store: trailing bytes after the model");
    try {
        m.validate();
        for (const auto& f : m.margins) f.params.validate();
    } catch (const InputError& e) {
        throw FormatError(std::string("model store: inconsistent model: ") + e.what());
    }
    return a;
}

inline void save_model(const std::string& path, const ModelArtifact& a) {
    const std::string bytes = encode_model(a);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("model store: cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("model store: write to '" + path + "' failed");
}

inline ModelArtifact load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("model store: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_model(ss.str());
}

}  // namespace gmmn_garch
