#include "leamatch/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>
#include <vector>

#include "leamatch/digest.hpp"

namespace leamatch {

namespace {

namespace pt = boost::property_tree;

struct Field {
    std::string section;
    std::string key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
};

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
Field field(std::string section, std::string key, T& ref) {
    Field f;
    f.section = std::move(section);
    f.key = std::move(key);
    f.get = [&ref]() -> std::string {
        if constexpr (std::is_floating_point_v<T>) return format_double(ref);
        else return std::to_string(ref);
    };
    f.set = [&ref, name = f.section + "." + f.key](const std::string& text) {
        try {
            std::size_t used = 0;
            if constexpr (std::is_floating_point_v<T>) ref = std::stod(text, &used);
            else if constexpr (std::is_same_v<T, std::uint64_t>) ref = std::stoull(text, &used);
            else ref = static_cast<T>(std::stoll(text, &used));
            if (used != text.size()) throw std::invalid_argument(text);
        } catch (const std::exception&) {
            throw Error(ErrorCode::BadConfig, name + ": cannot parse '" + text + "'");
        }
    };
    return f;
}

std::vector<Field> fields(Config& c) {
    auto& cc = c.pipeline.surface.crosscut;
    auto& g = c.pipeline.surface.grooves;
    auto& sig = c.pipeline.surface.signature;
    auto& st = c.pipeline.striae;
    auto& f = c.forest;
    auto& tr = c.training;
    auto& sy = c.synth;
    return {
        field("crosscut", "min_row_offset", cc.min_row_offset),
        field("crosscut", "band", cc.band),
        field("crosscut", "delta", cc.delta),
        field("crosscut", "stability_threshold", cc.stability_threshold),
        field("crosscut", "max_band_masked", cc.max_band_masked),
        field("grooves", "shoulder_fraction", g.shoulder_fraction),
        field("grooves", "rise_threshold_um", g.rise_threshold_um),
        field("grooves", "persistence", g.persistence),
        field("grooves", "irls_iterations", g.irls_iterations),
        field("grooves", "biweight_tuning", g.biweight_tuning),
        field("grooves", "min_interior", g.min_interior),
        field("grooves", "min_profile_length", g.min_profile_length),
        field("lowess", "span", sig.lowess.span),
        field("lowess", "degree", sig.lowess.degree),
        field("signature", "max_gap_fraction", sig.max_gap_fraction),
        field("striae", "min_overlap_frac", st.min_overlap_frac),
        field("striae", "smooth_window", st.smooth_window),
        field("striae", "min_prominence_um", st.min_prominence_um),
        field("striae", "match_tolerance", st.match_tolerance),
        field("forest", "n_trees", f.n_trees),
        field("forest", "max_depth", f.max_depth),
        field("forest", "min_leaf", f.min_leaf),
        field("forest", "feature_subset_size", f.feature_subset_size),
        field("forest", "seed", f.seed),
        field("forest", "min_per_class", f.min_per_class),
        field("training", "negatives_per_positive", tr.negatives_per_positive),
        field("training", "seed", tr.seed),
        field("synth", "rows", sy.rows),
        field("synth", "cols", sy.cols),
        field("synth", "x_res_um", sy.x_res_um),
        field("synth", "y_res_um", sy.y_res_um),
        field("synth", "latent_length", sy.latent_length),
        field("synth", "correlation_length", sy.correlation_length),
        field("synth", "highpass_length", sy.highpass_length),
        field("synth", "pattern_sd_um", sy.pattern_sd_um),
        field("synth", "bullet_radius_um", sy.bullet_radius_um),
        field("synth", "shoulder_height_um", sy.shoulder_height_um),
        field("synth", "shoulder_margin", sy.shoulder_margin),
        field("synth", "shoulder_ramp", sy.shoulder_ramp),
        field("synth", "taper_top", sy.taper_top),
        field("synth", "wear_jitter", sy.wear_jitter),
        field("synth", "noise_sd_um", sy.noise_sd_um),
        field("synth", "texture_sd_um", sy.texture_sd_um),
        field("synth", "nose_texture_sd_um", sy.nose_texture_sd_um),
        field("synth", "max_lateral_shift", sy.max_lateral_shift),
        field("synth", "n_lands", sy.n_lands),
        field("synth", "holdout_fraction", sy.holdout_fraction),
    };
}

std::string render(std::vector<Field>& fs, const std::vector<std::string>& only_sections = {}) {
    std::ostringstream out;
    std::string current;
    for (const auto& f : fs) {
        if (!only_sections.empty() &&
            std::find(only_sections.begin(), only_sections.end(), f.section) == only_sections.end())
            continue;
        if (f.section != current) {
            if (!current.empty()) out << '\n';
            out << '[' << f.section << "]\n";
            current = f.section;
        }
        out << f.key << " = " << f.get() << '\n';
    }
    return out.str();
}

}  // namespace

Config parse_config(const std::string& ini_text) {
    pt::ptree tree;
    try {
        std::istringstream in(ini_text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorCode::BadConfig, e.what());
    }
    Config cfg;
    auto fs = fields(cfg);
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw Error(ErrorCode::BadConfig, "key outside a section: " + section);
        for (const auto& [key, value] : body) {
            auto it = std::find_if(fs.begin(), fs.end(),
                                   [&](const Field& f) { return f.section == section && f.key == key; });
            if (it == fs.end()) throw Error(ErrorCode::BadConfig, "unknown key " + section + "." + key);
            it->set(value.data());
        }
    }
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_ini(const Config& cfg) {
    Config copy = cfg;
    auto fs = fields(copy);
    return render(fs);
}

std::uint64_t pipeline_digest(const PipelineConfig& pipeline) {
    Config copy;
    copy.pipeline = pipeline;
    auto fs = fields(copy);
    return fnv1a(render(fs, {"crosscut", "grooves", "lowess", "signature", "striae"}));
}

}  // namespace leamatch
