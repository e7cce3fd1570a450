#include "ipaint/train/run_config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "ipaint/core/error.hpp"
#include "ipaint/core/sha256.hpp"

namespace ipaint::train {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void check_keys(const YAML::Node& n, std::initializer_list<const char*> allowed,
                const char* section) {
    for (const auto& kv : n) {
        const std::string key = kv.first.as<std::string>();
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok)
            throw UsageError(std::string("config: unknown key '") + key + "' in section '" +
                             section + "'");
    }
}

template <typename V>
V field(const YAML::Node& n, const char* key, V def) {
    if (!n || !n[key]) return def;
    try {
        return n[key].as<V>();
    } catch (const YAML::Exception&) {
        throw UsageError(std::string("config: bad value for '") + key + "'");
    }
}

template <size_t N>
void read_taps(const YAML::Node& n, const char* key, std::array<double, N>& out) {
    if (!n || !n[key]) return;
    const YAML::Node seq = n[key];
    if (!seq.IsSequence() || seq.size() != N)
        throw UsageError(std::string("config: '") + key + "' must be a list of " +
                         std::to_string(N) + " weights");
    for (size_t i = 0; i < N; ++i) {
        try {
            out[i] = seq[i].as<double>();
        } catch (const YAML::Exception&) {
            throw UsageError(std::string("config: bad value in '") + key + "'");
        }
    }
}

}  // namespace

void RunConfig::validate() const {
    if (epochs < 1) throw UsageError("config: epochs must be >= 1");
    if (batch_size < 1) throw UsageError("config: batch_size must be >= 1");
    if (max_steps < 0) throw UsageError("config: max_steps must be >= 0");
    if (val_every < 1) throw UsageError("config: val_every must be >= 1");
    if (!(lr > 0.0)) throw UsageError("config: lr must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw UsageError("config: moment decays must lie in (0, 1)");
    try {
        weights.validate();
        model.validate();
    } catch (const Error& e) {
        // config context: invalid values are a usage problem, not bad data
        throw UsageError(std::string("config: ") + e.what());
    }
}

std::string RunConfig::to_yaml() const {
    std::ostringstream o;
    o << "run:\n";
    o << "  epochs: " << epochs << "\n";
    o << "  batch_size: " << batch_size << "\n";
    o << "  max_steps: " << max_steps << "\n";
    o << "  val_every: " << val_every << "\n";
    o << "  desk_scale: " << (desk_scale ? "true" : "false") << "\n";
    o << "optimizer:\n";
    o << "  lr: " << fmt(lr) << "\n";
    o << "  beta1: " << fmt(beta1) << "\n";
    o << "  beta2: " << fmt(beta2) << "\n";
    o << "loss:\n";
    o << "  adv: " << fmt(weights.adv) << "\n";
    o << "  style: " << fmt(weights.style) << "\n";
    o << "  percep: " << fmt(weights.percep) << "\n";
    o << "  l1: " << fmt(weights.l1) << "\n";
    o << "  percep_tap: [";
    for (size_t i = 0; i < weights.percep_tap.size(); ++i)
        o << (i ? ", " : "") << fmt(weights.percep_tap[i]);
    o << "]\n";
    o << "  style_tap: [";
    for (size_t i = 0; i < weights.style_tap.size(); ++i)
        o << (i ? ", " : "") << fmt(weights.style_tap[i]);
    o << "]\n";
    o << "masks:\n";
    o << "  mode: " << img::mask_kind_name(mask_mode) << "\n";
    o << "seeds:\n";
    o << "  global: " << seeds.global << "\n";
    o << "  data: " << seeds.data << "\n";
    o << "  masks: " << seeds.masks << "\n";
    o << "model:\n";
    o << "  depth: " << model.depth << "\n";
    o << "  base_width: " << model.base_width << "\n";
    o << "  stages: " << model.stages << "\n";
    o << "paths:\n";
    o << "  slices: \"" << slices_dir << "\"\n";
    o << "  train_masks: \"" << train_masks_dir << "\"\n";
    o << "  val_masks: \"" << val_masks_dir << "\"\n";
    o << "  vgg_weights: \"" << vgg_weights << "\"\n";
    o << "  out: \"" << out_dir << "\"\n";
    return o.str();
}

RunConfig RunConfig::from_yaml(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw UsageError(std::string("config: parse failure: ") + e.what());
    }
    if (!root.IsMap()) throw UsageError("config: top level must be a mapping");
    check_keys(root, {"run", "optimizer", "loss", "masks", "seeds", "model", "paths"},
               "top level");

    RunConfig c;
    const YAML::Node run = root["run"];
    if (run) check_keys(run, {"epochs", "batch_size", "max_steps", "val_every", "desk_scale"},
                        "run");
    c.epochs = field<int64_t>(run, "epochs", c.epochs);
    c.batch_size = field<int64_t>(run, "batch_size", c.batch_size);
    c.max_steps = field<int64_t>(run, "max_steps", c.max_steps);
    c.val_every = field<int64_t>(run, "val_every", c.val_every);
    c.desk_scale = field<bool>(run, "desk_scale", c.desk_scale);

    const YAML::Node opt = root["optimizer"];
    if (opt) check_keys(opt, {"lr", "beta1", "beta2"}, "optimizer");
    c.lr = field<double>(opt, "lr", c.lr);
    c.beta1 = field<double>(opt, "beta1", c.beta1);
    c.beta2 = field<double>(opt, "beta2", c.beta2);

    const YAML::Node lw = root["loss"];
    if (lw) check_keys(lw, {"adv", "style", "percep", "l1", "percep_tap", "style_tap"},
                       "loss");
    c.weights.adv = field<double>(lw, "adv", c.weights.adv);
    c.weights.style = field<double>(lw, "style", c.weights.style);
    c.weights.percep = field<double>(lw, "percep", c.weights.percep);
    c.weights.l1 = field<double>(lw, "l1", c.weights.l1);
    read_taps(lw, "percep_tap", c.weights.percep_tap);
    read_taps(lw, "style_tap", c.weights.style_tap);

    const YAML::Node mk = root["masks"];
    if (mk) check_keys(mk, {"mode"}, "masks");
    const std::string mode = field<std::string>(mk, "mode", "arbitrary");
    try {
        c.mask_mode = img::mask_kind_from_name(mode);
    } catch (const Error&) {
        throw UsageError("config: masks.mode must be 'square' or 'arbitrary'");
    }

    const YAML::Node sd = root["seeds"];
    if (sd) check_keys(sd, {"global", "data", "masks"}, "seeds");
    c.seeds.global = field<uint64_t>(sd, "global", c.seeds.global);
    c.seeds.data = field<uint64_t>(sd, "data", c.seeds.data);
    c.seeds.masks = field<uint64_t>(sd, "masks", c.seeds.masks);

    // desk_scale shrinks the default widths; an explicit model section wins
    if (c.desk_scale) c.model.base_width = 8;
    const YAML::Node md = root["model"];
    if (md) check_keys(md, {"depth", "base_width", "stages"}, "model");
    c.model.depth = field<int64_t>(md, "depth", c.model.depth);
    c.model.base_width = field<int64_t>(md, "base_width", c.model.base_width);
    c.model.stages = field<int64_t>(md, "stages", c.model.stages);

    const YAML::Node pt = root["paths"];
    if (pt) check_keys(pt, {"slices", "train_masks", "val_masks", "vgg_weights", "out"},
                       "paths");
    c.slices_dir = field<std::string>(pt, "slices", "");
    c.train_masks_dir = field<std::string>(pt, "train_masks", "");
    c.val_masks_dir = field<std::string>(pt, "val_masks", "");
    c.vgg_weights = field<std::string>(pt, "vgg_weights", "");
    c.out_dir = field<std::string>(pt, "out", "");

    c.validate();
    return c;
}

RunConfig RunConfig::from_yaml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("config file not readable: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_yaml(ss.str());
}

std::string RunConfig::sha256() const {
    const std::string y = to_yaml();
    return sha256_hex(y.data(), y.size());
}

std::string RunConfig::identity_sha256() const {
    RunConfig id = *this;
    id.max_steps = 0;
    id.slices_dir.clear();
    id.train_masks_dir.clear();
    id.val_masks_dir.clear();
    id.vgg_weights.clear();
    id.out_dir.clear();
    const std::string y = id.to_yaml();
    return sha256_hex(y.data(), y.size());
}

std::string resolve_out_path(const std::string& path) {
    const char* root = std::getenv("IPAINT_OUT_ROOT");
    if (root == nullptr || *root == '\0' || path.empty() || path.front() == '/')
        return path;
    return std::string(root) + "/" + path;
}

}  // namespace ipaint::train
