#pragma once

#include "gmmn_garch/assessment.hpp"
#include "gmmn_garch/core.hpp"
#include "gmmn_garch/dataset.hpp"
#include "gmmn_garch/dependence.hpp"
#include "gmmn_garch/margins.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace gmmn_garch {

using Json = nlohmann::json;

struct PcaConfig {
    bool enabled = false;
    double threshold = 0.95;
    int k_min = 3;
};

struct ForecastConfig {
    int n_pth = 1000;
    int h = 1;
};

struct PipelineConfig {
    DatasetSpec dataset{};
    ArmaGarchOrders orders{};
    bool fix_mu_zero = false;
    InitPolicy init = InitPolicy::Unconditional;
    PcaConfig pca{};
    std::vector<DependenceSpec> dependence{DependenceSpec{}};
    ForecastConfig forecast{};
    AssessConfig assess{};
    int n_bt = 100;
    std::optional<std::uint64_t> seed;

    void validate() const {
        const auto& o = orders;
        if (o.p1 < 0 || o.q1 < 0 || o.p2 < 0 || o.q2 < 0 || o.p2 + o.q2 == 0)
            throw ConfigError("config: orders must be non-negative with at least one GARCH term");
        if (!(pca.threshold > 0.0 && pca.threshold <= 1.0)) throw ConfigError("config: pca.threshold must lie in (0, 1]");
        if (pca.k_min < 1) throw ConfigError("config: pca.k_min must be >= 1");
        if (dependence.empty()) throw ConfigError("config: at least one dependence model is required");
        std::set<std::string> labels;
        for (const auto& d : dependence) {
            if (!labels.insert(d.label()).second) throw ConfigError("config: duplicate dependence model '" + d.label() + "'");
            if (d.kind == DependenceKind::Gmmn) {
                if (d.gmmn.hidden.empty()) throw ConfigError("config: gmmn needs at least one hidden layer");
                for (int h : d.gmmn.hidden)
                    if (h < 1) throw ConfigError("config: gmmn hidden widths must be positive");
                if (!(d.gmmn.dropout_rate >= 0.0 && d.gmmn.dropout_rate < 1.0))
                    throw ConfigError("config: gmmn dropout must lie in [0, 1)");
                if (d.gmmn.n_epo < 1) throw ConfigError("config: gmmn epochs must be >= 1");
                if (d.gmmn.n_bat < 0) throw ConfigError("config: gmmn batch must be >= 0");
                d.gmmn.kernel.validate();
            }
        }
        if (forecast.n_pth < 1 || forecast.h < 1) throw ConfigError("config: forecast.n_pth and forecast.h must be >= 1");
        assess.validate();
        if (n_bt < 1) throw ConfigError("config: bootstrap.n_bt must be >= 1");
    }

    [[nodiscard]] std::uint64_t require_seed() const {
        if (!seed) throw ConfigError("config: a seed is required (set \"seed\" or pass --seed)");
        return *seed;
    }
};

namespace detail {

inline std::string dependence_type(DependenceKind k) {
    switch (k) {
        case DependenceKind::Independence: return "independence";
        case DependenceKind::Empirical: return "empirical";
        case DependenceKind::EmpiricalBeta: return "empirical_beta";
        case DependenceKind::Gmmn: return "gmmn";
    }
    return "independence";
}

inline DependenceKind parse_dependence_type(const std::string& s) {
    if (s == "independence") return DependenceKind::Independence;
    if (s == "empirical") return DependenceKind::Empirical;
    if (s == "empirical_beta") return DependenceKind::EmpiricalBeta;
    if (s == "gmmn") return DependenceKind::Gmmn;
    throw ConfigError("config: unknown dependence type '" + s + "'");
}

/// Reads an object, rejecting keys not in `allowed`.
class Section {
public:
    Section(const Json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config: '" + name() + "' must be an object");
        for (const auto& [k, v] : j_.items())
            if (!allowed.count(k)) throw ConfigError("config: unknown key '" + qualified(k) + "'");
    }

    template <typename T>
    void get(const std::string& key, T& out) const {
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const Json::exception&) {
            throw ConfigError("config: '" + qualified(key) + "' has the wrong type");
        }
    }

    [[nodiscard]] const Json* child(const std::string& key) const { return j_.contains(key) ? &j_.at(key) : nullptr; }
    [[nodiscard]] std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    [[nodiscard]] std::string name() const { return path_.empty() ? "<root>" : path_; }

private:
    const Json& j_;
    std::string path_;
};

inline KernelSpec kernel_from(const Section& s, const std::string& key, KernelSpec def) {
    std::vector<double> bw = def.bandwidths;
    s.get(key, bw);
    KernelSpec k{bw};
    try {
        k.validate();
    } catch (const InputError& e) {
        throw ConfigError("config: '" + s.qualified(key) + "': " + e.what());
    }
    return k;
}

}  // namespace detail

inline Json to_json(const DependenceSpec& d) {
    Json j{{"type", detail::dependence_type(d.kind)}};
    if (d.kind == DependenceKind::Gmmn) {
        j["hidden"] = d.gmmn.hidden;
        j["dropout"] = d.gmmn.dropout_rate;
        j["epochs"] = d.gmmn.n_epo;
        j["batch"] = d.gmmn.n_bat;
        j["kernel"] = d.gmmn.kernel.bandwidths;
    }
    return j;
}

/// Full tree with every default filled in; the canonical form is its dump.
inline Json to_json(const PipelineConfig& c) {
    Json deps = Json::array();
    for (const auto& d : c.dependence) deps.push_back(to_json(d));
    Json j{
        {"dataset", {{"transform", to_string(c.dataset.transform)}, {"tau", c.dataset.tau},
                     {"train_fraction", c.dataset.train_fraction}}},
        {"margins", {{"orders", {c.orders.p1, c.orders.q1, c.orders.p2, c.orders.q2}},
                     {"fix_mu_zero", c.fix_mu_zero},
                     {"init", c.init == InitPolicy::Unconditional ? "unconditional" : "sample_variance"}}},
        {"pca", {{"enabled", c.pca.enabled}, {"threshold", c.pca.threshold}, {"k_min", c.pca.k_min}}},
        {"dependence", deps},
        {"forecast", {{"n_pth", c.forecast.n_pth}, {"h", c.forecast.h}}},
        {"assess", {{"n_rep", c.assess.n_rep}, {"kernel", c.assess.kernel.bandwidths}, {"r", c.assess.r},
                    {"alpha", c.assess.alpha}}},
        {"bootstrap", {{"n_bt", c.n_bt}}},
    };
    j["seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
    return j;
}

inline DependenceSpec dependence_from_json(const Json& j, const std::string& path) {
    if (j.is_string()) return dependence_from_json(Json{{"type", j}}, path);
    const detail::Section s(j, path, {"type", "hidden", "dropout", "epochs", "batch", "kernel"});
    std::string type;
    s.get("type", type);
    if (type.empty()) throw ConfigError("config: '" + s.qualified("type") + "' is required");
    DependenceSpec d;
    d.kind = detail::parse_dependence_type(type);
    if (d.kind != DependenceKind::Gmmn) {
        for (const char* k : {"hidden", "dropout", "epochs", "batch", "kernel"})
            if (s.child(k)) throw ConfigError("config: '" + s.qualified(k) + "' only applies to gmmn");
        return d;
    }
    s.get("hidden", d.gmmn.hidden);
    s.get("dropout", d.gmmn.dropout_rate);
    s.get("epochs", d.gmmn.n_epo);
    s.get("batch", d.gmmn.n_bat);
    d.gmmn.kernel = detail::kernel_from(s, "kernel", KernelSpec::training_default());
    return d;
}

inline PipelineConfig config_from_json(const Json& j) {
    PipelineConfig c;
    const detail::Section root(j, "", {"dataset", "margins", "pca", "dependence", "forecast", "assess", "bootstrap", "seed"});
    if (const Json* ds = root.child("dataset")) {
        const detail::Section s(*ds, "dataset", {"transform", "tau", "train_fraction"});
        std::string t = to_string(c.dataset.transform);
        s.get("transform", t);
        c.dataset.transform = parse_transform(t);
        s.get("tau", c.dataset.tau);
        s.get("train_fraction", c.dataset.train_fraction);
        if (c.dataset.tau < 0) throw ConfigError("config: 'dataset.tau' must be >= 0");
    }
    if (const Json* m = root.child("margins")) {
        const detail::Section s(*m, "margins", {"orders", "fix_mu_zero", "init"});
        std::vector<int> o{c.orders.p1, c.orders.q1, c.orders.p2, c.orders.q2};
        s.get("orders", o);
        if (o.size() != 4) throw ConfigError("config: 'margins.orders' must have four entries (p1, q1, p2, q2)");
        c.orders = {o[0], o[1], o[2], o[3]};
        s.get("fix_mu_zero", c.fix_mu_zero);
        std::string init = "unconditional";
        s.get("init", init);
        if (init == "unconditional") c.init = InitPolicy::Unconditional;
        else if (init == "sample_variance") c.init = InitPolicy::SampleVariance;
        else throw ConfigError("config: 'margins.init' must be unconditional or sample_variance");
    }
    if (const Json* p = root.child("pca")) {
        const detail::Section s(*p, "pca", {"enabled", "threshold", "k_min"});
        s.get("enabled", c.pca.enabled);
        s.get("threshold", c.pca.threshold);
        s.get("k_min", c.pca.k_min);
    }
    if (const Json* d = root.child("dependence")) {
        if (!d->is_array()) throw ConfigError("config: 'dependence' must be an array");
        c.dependence.clear();
        for (std::size_t i = 0; i < d->size(); ++i)
            c.dependence.push_back(dependence_from_json((*d)[i], "dependence[" + std::to_string(i) + "]"));
    }
    if (const Json* f = root.child("forecast")) {
        const detail::Section s(*f, "forecast", {"n_pth", "h"});
        s.get("n_pth", c.forecast.n_pth);
        s.get("h", c.forecast.h);
    }
    if (const Json* a = root.child("assess")) {
        const detail::Section s(*a, "assess", {"n_rep", "kernel", "r", "alpha"});
        s.get("n_rep", c.assess.n_rep);
        s.get("r", c.assess.r);
        s.get("alpha", c.assess.alpha);
        c.assess.kernel = detail::kernel_from(s, "kernel", KernelSpec::assessment_default());
    }
    if (const Json* b = root.child("bootstrap")) {
        const detail::Section s(*b, "bootstrap", {"n_bt"});
        s.get("n_bt", c.n_bt);
    }
    if (const Json* seed = root.child("seed"); seed && !seed->is_null()) {
        if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0))
            throw ConfigError("config: 'seed' must be a non-negative integer");
        c.seed = seed->get<std::uint64_t>();
    }
    c.assess.n_pth = c.forecast.n_pth;
    c.validate();
    return c;
}

inline PipelineConfig parse_config(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    return config_from_json(j);
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// One canonical serialization: sorted keys, no whitespace, all defaults present.
inline std::string canonical_config(const PipelineConfig& c) { return to_json(c).dump(); }

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const PipelineConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_config(c))));
    return buf;
}

/// Applies "a.b.c=value" to the tree; value is read as JSON when it parses,
/// otherwise as a string.
inline void apply_override(Json& tree, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string path = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    Json* node = &tree;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
        if (!node->is_object()) throw ConfigError("override '" + assignment + "' walks into a non-object");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = Json::object();
        start = dot + 1;
    }
}

}  // namespace gmmn_garch
