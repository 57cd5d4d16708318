#include "augforget/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace augforget {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_commas(std::string_view s) {
    std::vector<std::string> out;
    while (true) {
        const auto comma = s.find(',');
        const auto piece = trim(s.substr(0, comma));
        if (!piece.empty()) out.emplace_back(piece);
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
    throw Error(ErrorKind::invalid_argument,
                "--" + std::string(key) + ": '" + std::string(value) + "' is not " + expected);
}

double parse_double(std::string_view key, std::string_view text) {
    const auto t = trim(text);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || end != t.data() + t.size() || !std::isfinite(v)) bad_value(key, text, "a number");
    return v;
}

std::uint64_t parse_u64(std::string_view key, std::string_view text) {
    const auto t = trim(text);
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || end != t.data() + t.size()) bad_value(key, text, "a non-negative integer");
    return v;
}

} // namespace

const std::vector<ConfigKey>& Config::keys() {
    static const std::vector<ConfigKey> k{
        {"seed", "1", "master seed"},
        {"data", "", "MNIST directory (falls back to $AUGFORGET_DATA)"},
        {"synthetic", "false", "use generated digit glyphs instead of MNIST"},
        {"pool", "10000", "training pool size (first records of the train split)"},
        {"eval", "2000", "held-out size (first records of the test split)"},
        {"hidden", "256,128", "hidden layer widths"},
        {"epochs", "5", "epochs of the first (or only) phase"},
        {"epochs2", "3", "epochs of the second phase"},
        {"lr", "0.05", "SGD learning rate"},
        {"batch", "64", "minibatch size"},
        {"transforms", default_transform_set().label(), "augmentation set for train/ablate"},
        {"policy", "uniform", "uniform | targeted"},
        {"beta", "1", "targeted policy temperature"},
        {"policy-refresh", "50", "steps between targeted policy re-scoring"},
        {"method", "vanilla", "vanilla | replay | merge | average"},
        {"replay-fraction", "0.5", "replay buffer capacity as a fraction of the pool"},
        {"replay-mix", "0.5", "share of each batch drawn from the replay buffer"},
        {"merge-p", "80", "percentage of most-drifted parameters merged"},
        {"merge-k", "100", "merge interval in iterations"},
        {"first-angle", "45", "evil-twin first rotation"},
        {"angles", "45,30,15,0,-15,-30,-45", "evil-twin second rotations"},
        {"sd-batches", "10", "minibatches in the aggregated sign discrepancy"},
        {"sigmas", "0,0.1,0.5,1,2,5", "noise levels for taylor"},
        {"taylor-samples", "100000", "samples per sigma"},
        {"taylor-dim", "16", "dimension of the toy problem"},
        {"taylor-scale", "1", "A = scale * I"},
        {"t1", "rotate:15,rotate:45", "cka first transform set"},
        {"t2", "rotate:-15,rotate:-45", "cka second transform set"},
        {"probe", "512", "cka probe size"},
        {"cka-methods", "vanilla,replay,merge", "second-phase methods compared by cka"},
        {"p-grid", "20,40,60,80,100", "merge percentages for ablate"},
        {"checkpoint", "", "checkpoint to describe (info)"},
        {"out", "", "output directory"},
    };
    return k;
}

bool Config::known(std::string_view key) {
    const auto& k = keys();
    return std::any_of(k.begin(), k.end(), [&](const ConfigKey& c) { return c.name == key; });
}

Config::Config() {
    for (const auto& k : keys()) values_[k.name] = k.default_value;
}

void Config::set(std::string_view key, std::string value) {
    if (!known(key)) throw Error(ErrorKind::invalid_argument, "unknown config key '" + std::string(key) + "'");
    values_[std::string(key)] = std::move(value);
}

const std::string& Config::get(std::string_view key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorKind::invalid_argument, "unknown config key '" + std::string(key) + "'");
    return it->second;
}

void Config::merge_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, path.string() + ": cannot open config");
    std::stringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str(), path.string());
}

void Config::merge_text(std::string_view text, const std::string& origin) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = trim(text.substr(0, nl));
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::invalid_argument, origin + ":" + std::to_string(line_no) + ": expected key=value");
        }
        const auto key = trim(line.substr(0, eq));
        if (!known(key)) {
            throw Error(ErrorKind::invalid_argument,
                        origin + ":" + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        }
        set(key, std::string(trim(line.substr(eq + 1))));
    }
}

std::string Config::render() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

std::uint64_t Config::get_u64(std::string_view key) const { return parse_u64(key, get(key)); }

std::size_t Config::get_size(std::string_view key) const { return static_cast<std::size_t>(get_u64(key)); }

double Config::get_double(std::string_view key) const { return parse_double(key, get(key)); }

bool Config::get_bool(std::string_view key) const {
    const auto& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0" || v.empty()) return false;
    bad_value(key, v, "true or false");
}

std::vector<double> Config::get_doubles(std::string_view key) const {
    std::vector<double> out;
    for (const auto& w : split_commas(get(key))) out.push_back(parse_double(key, w));
    return out;
}

std::vector<std::size_t> Config::get_sizes(std::string_view key) const {
    std::vector<std::size_t> out;
    for (const auto& w : split_commas(get(key))) out.push_back(static_cast<std::size_t>(parse_u64(key, w)));
    return out;
}

std::vector<std::string> Config::get_words(std::string_view key) const { return split_commas(get(key)); }

void Config::validate() const {
    evil_twin_config(*this);
    taylor_config(*this);
    cka_config(*this);
    ablation_config(*this);
    if (get("policy") != "uniform" && get("policy") != "targeted") bad_value("policy", get("policy"), "uniform or targeted");
}

DataSource data_source(const Config& c) {
    DataSource s;
    s.synthetic = c.get_bool("synthetic");
    s.dir = c.get("data");
    return s;
}

TrainSettings first_phase(const Config& c) { return {c.get_size("epochs"), c.get_size("batch"), c.get_double("lr")}; }

TrainSettings second_phase(const Config& c) { return {c.get_size("epochs2"), c.get_size("batch"), c.get_double("lr")}; }

MethodSpec method_spec(const Config& c, std::string_view name) {
    MethodSpec m;
    try {
        m.kind = parse_method_kind(name);
    } catch (const Error&) {
        bad_value("method", name, "vanilla, replay, merge or average");
    }
    m.replay_fraction = c.get_double("replay-fraction");
    m.replay_mix = c.get_double("replay-mix");
    m.merge_p = m.kind == MethodKind::average ? 100.0 : c.get_double("merge-p");
    m.merge_k = c.get_size("merge-k");
    m.validate();
    return m;
}

PolicySpec policy_spec(const Config& c) {
    PolicySpec p;
    const auto& kind = c.get("policy");
    if (kind != "uniform" && kind != "targeted") bad_value("policy", kind, "uniform or targeted");
    p.targeted = kind == "targeted";
    p.beta = c.get_double("beta");
    p.refresh = c.get_size("policy-refresh");
    if (p.beta < 0.0) bad_value("beta", c.get("beta"), "a non-negative number");
    if (p.refresh == 0) bad_value("policy-refresh", c.get("policy-refresh"), "a positive integer");
    return p;
}

namespace {

ModelShape model_shape(const Config& c) {
    ModelShape s{c.get_sizes("hidden")};
    for (const auto w : s.hidden)
        if (w == 0) bad_value("hidden", c.get("hidden"), "a list of positive widths");
    return s;
}

void check_settings(const Config& c, const TrainSettings& s) {
    if (s.batch_size == 0) bad_value("batch", c.get("batch"), "a positive integer");
    if (s.lr < 0.0) bad_value("lr", c.get("lr"), "a non-negative number");
}

} // namespace

EvilTwinConfig evil_twin_config(const Config& c) {
    EvilTwinConfig e;
    e.seed = c.get_u64("seed");
    e.data = data_source(c);
    e.pool_size = c.get_size("pool");
    e.eval_size = c.get_size("eval");
    e.shape = model_shape(c);
    e.first_angle = c.get_double("first-angle");
    e.angles = c.get_doubles("angles");
    if (e.angles.empty()) bad_value("angles", c.get("angles"), "a non-empty list");
    e.first = first_phase(c);
    e.second = second_phase(c);
    check_settings(c, e.first);
    e.sd_batches = c.get_size("sd-batches");
    if (e.sd_batches == 0) bad_value("sd-batches", c.get("sd-batches"), "a positive integer");
    e.method = method_spec(c, c.get("method"));
    return e;
}

TaylorConfig taylor_config(const Config& c) {
    TaylorConfig t;
    t.seed = c.get_u64("seed");
    t.sigmas = c.get_doubles("sigmas");
    if (t.sigmas.empty()) bad_value("sigmas", c.get("sigmas"), "a non-empty list");
    for (const double s : t.sigmas)
        if (s < 0.0) bad_value("sigmas", c.get("sigmas"), "a list of non-negative numbers");
    t.samples = c.get_size("taylor-samples");
    if (t.samples < 2) bad_value("taylor-samples", c.get("taylor-samples"), "an integer >= 2");
    t.dim = c.get_size("taylor-dim");
    if (t.dim == 0) bad_value("taylor-dim", c.get("taylor-dim"), "a positive integer");
    t.a_scale = c.get_double("taylor-scale");
    return t;
}

CkaCompareConfig cka_config(const Config& c) {
    CkaCompareConfig k;
    k.seed = c.get_u64("seed");
    k.data = data_source(c);
    k.pool_size = c.get_size("pool");
    k.probe_size = c.get_size("probe");
    k.shape = model_shape(c);
    try {
        k.first_set = TransformSet::parse(c.get("t1"));
        k.second_set = TransformSet::parse(c.get("t2"));
    } catch (const Error& e) {
        throw Error(ErrorKind::invalid_argument, std::string("--t1/--t2: ") + e.what());
    }
    k.first = first_phase(c);
    k.second = second_phase(c);
    check_settings(c, k.first);
    k.methods.clear();
    for (const auto& w : c.get_words("cka-methods")) k.methods.push_back(method_spec(c, w));
    return k;
}

MethodComparisonConfig method_comparison_config(const Config& c) {
    MethodComparisonConfig m;
    m.seed = c.get_u64("seed");
    m.data = data_source(c);
    m.pool_size = c.get_size("pool");
    m.eval_size = c.get_size("eval");
    m.shape = model_shape(c);
    try {
        m.transforms = TransformSet::parse(c.get("transforms"));
    } catch (const Error& e) {
        throw Error(ErrorKind::invalid_argument, std::string("--transforms: ") + e.what());
    }
    m.policy = policy_spec(c);
    m.train = first_phase(c);
    check_settings(c, m.train);
    m.methods = {method_spec(c, c.get("method"))};
    m.probe_size = c.get_size("probe");
    return m;
}

AblationConfig ablation_config(const Config& c) {
    AblationConfig a;
    a.base = method_comparison_config(c);
    a.p_grid = c.get_doubles("p-grid");
    if (a.p_grid.empty()) bad_value("p-grid", c.get("p-grid"), "a non-empty list");
    for (const double p : a.p_grid)
        if (!(p > 0.0 && p <= 100.0)) bad_value("p-grid", c.get("p-grid"), "a list of percentages in (0, 100]");
    a.merge_k = c.get_size("merge-k");
    return a;
}

} // namespace augforget
