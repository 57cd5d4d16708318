#include "augforget/cli.hpp"

#include "augforget/checkpoint.hpp"
#include "augforget/config.hpp"
#include "augforget/csv.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>

namespace augforget::cli {

namespace {

struct Subcommand {
    const char* name;
    const char* help;
};

constexpr Subcommand subcommands[] = {
    {"train", "train one method under random or targeted augmentation; writes model.afck and metrics.csv"},
    {"evil-twin", "rotation forgetting sweep; writes evil_twin.csv"},
    {"taylor", "gradient alignment under input noise; writes taylor.csv"},
    {"cka", "layer CKA after a second augmentation phase; writes cka_<method>.csv"},
    {"ablate", "merge percentage grid; writes ablation.csv"},
    {"info", "print defaults, or describe --checkpoint"},
};

struct Parsed {
    std::string command;
    std::string config_file;
    bool synthetic = false;
    std::map<std::string, std::string> flags;
};

std::string row_label(double v) { return format_real(v); }

void write_evil_twin(const Config& c, const std::filesystem::path& dir, std::ostream& out) {
    const auto report = run_evil_twin(evil_twin_config(c));
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : report.rows) {
        rows.push_back({row_label(r.angle), format_real(r.acc_before), format_real(r.acc_after), format_real(r.forgetting),
                        format_real(r.aggregated_sd)});
    }
    write_csv(dir / "evil_twin.csv", {"angle", "acc_before", "acc_after", "forgetting", "aggregated_sd"}, rows);
    out << "spearman_rho " << format_real(report.spearman_rho) << "\nmean_forgetting "
        << format_real(report.mean_forgetting()) << "\n";
}

void write_taylor(const Config& c, const std::filesystem::path& dir, std::ostream&) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : run_taylor_oracle(taylor_config(c)))
        rows.push_back({format_real(p.sigma), format_real(p.mean_cos), format_real(p.stderr_cos)});
    write_csv(dir / "taylor.csv", {"sigma", "mean_cos", "stderr"}, rows);
}

void write_cka(const Config& c, const std::filesystem::path& dir, std::ostream& out) {
    for (const auto& cmp : run_cka_compare(cka_config(c))) {
        write_csv(dir / ("cka_" + cmp.method + ".csv"), cmp.cka.csv_header(), cmp.cka.csv_rows());
        out << cmp.method << " diagonal_mean " << format_real(cmp.cka.diagonal_mean()) << "\n";
    }
}

void write_ablation(const Config& c, const std::filesystem::path& dir, std::ostream&) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : run_merge_ablation(ablation_config(c))) rows.push_back({format_real(r.p), format_real(r.accuracy)});
    write_csv(dir / "ablation.csv", {"p", "accuracy"}, rows);
}

void write_train(const Config& c, const std::filesystem::path& dir, std::ostream& out) {
    const auto report = run_method_comparison(method_comparison_config(c));
    const auto& r = report.results.front();
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < report.view_labels.size(); ++i)
        rows.push_back({"accuracy:" + report.view_labels[i], format_real(r.view_accuracy[i])});
    rows.push_back({"clean_accuracy", format_real(r.clean_accuracy)});
    rows.push_back({"mean_view_accuracy", format_real(r.mean_view_accuracy)});
    rows.push_back({"cka_epoch1_final", format_real(r.cka_diagonal_mean)});
    write_csv(dir / "metrics.csv", {"metric", "value"}, rows);
    save_checkpoint(dir / "model.afck", r.final_model);
    if (r.snapshot) {
        Mlp snap(r.final_model.layer_sizes());
        snap.set_flat_params(*r.snapshot);
        save_checkpoint(dir / "snapshot.afck", snap);
    }
    out << r.method << " mean_view_accuracy " << format_real(r.mean_view_accuracy) << "\n";
}

void print_info(const Config& c, std::ostream& out) {
    if (!c.get("checkpoint").empty()) {
        const Mlp m = load_checkpoint(c.get("checkpoint"));
        out << "layers";
        for (const auto s : m.layer_sizes()) out << ' ' << s;
        out << "\nparameters " << m.parameter_count() << "\n";
        return;
    }
    out << "defaults\n" << c.render();
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"augmentation forgetting experiments", "augforget"};
    app.require_subcommand(1, 1);
    app.fallthrough(false);

    Parsed parsed;
    std::map<std::string, CLI::Option*> options;
    std::map<std::string, CLI::App*> apps;
    for (const auto& sc : subcommands) {
        auto* sub = app.add_subcommand(sc.name, sc.help);
        apps[sc.name] = sub;
        sub->add_option("--config", parsed.config_file, "key=value file; explicit flags override it");
        sub->add_flag("--synthetic", parsed.synthetic, "use generated digit glyphs instead of MNIST");
        for (const auto& k : Config::keys()) {
            if (k.name == "synthetic") continue;
            auto* opt = sub->add_option("--" + k.name, parsed.flags[k.name], k.help);
            if (!k.default_value.empty()) opt->description(k.help + " [" + k.default_value + "]");
            options[std::string(sc.name) + "/" + k.name] = opt;
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "augforget: " << e.what() << "\n" << app.help();
        return exit_usage;
    }
    for (const auto& sc : subcommands)
        if (apps[sc.name]->parsed()) parsed.command = sc.name;
    auto* sub = apps[parsed.command];

    Config config;
    try {
        if (!parsed.config_file.empty()) config.merge_file(parsed.config_file);
        for (const auto& k : Config::keys()) {
            if (k.name == "synthetic") continue;
            if (options[parsed.command + "/" + k.name]->count() > 0) config.set(k.name, parsed.flags[k.name]);
        }
        if (parsed.synthetic) config.set("synthetic", "true");
        if (config.get("data").empty() && !config.get_bool("synthetic")) {
            if (const char* env = std::getenv("AUGFORGET_DATA"); env && *env) config.set("data", env);
        }
        config.validate();
    } catch (const Error& e) {
        err << "augforget " << parsed.command << ": " << e.what() << "\n";
        return e.kind() == ErrorKind::io ? exit_failure : exit_usage;
    }

    if (parsed.command == "info") {
        try {
            print_info(config, out);
            return exit_ok;
        } catch (const std::exception& e) {
            err << "augforget info: " << e.what() << "\n";
            return exit_failure;
        }
    }

    if (config.get("out").empty()) {
        err << "augforget " << parsed.command << ": --out is required\n" << sub->help();
        return exit_usage;
    }

    try {
        const std::filesystem::path dir = config.get("out");
        std::filesystem::create_directories(dir);
        {
            std::ofstream echo(dir / "config.txt", std::ios::binary | std::ios::trunc);
            if (!echo) throw Error(ErrorKind::io, (dir / "config.txt").string() + ": cannot open for writing");
            echo << config.render();
        }
        if (parsed.command == "train") write_train(config, dir, out);
        else if (parsed.command == "evil-twin") write_evil_twin(config, dir, out);
        else if (parsed.command == "taylor") write_taylor(config, dir, out);
        else if (parsed.command == "cka") write_cka(config, dir, out);
        else if (parsed.command == "ablate") write_ablation(config, dir, out);
        return exit_ok;
    } catch (const std::exception& e) {
        err << "augforget " << parsed.command << ": " << e.what() << "\n";
        return exit_failure;
    }
}

} // namespace augforget::cli
