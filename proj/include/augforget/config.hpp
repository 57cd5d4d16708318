#pragma once

#include "augforget/experiments.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace augforget {

struct ConfigKey {
    std::string name;
    std::string default_value;
    std::string help;
};

/// Flat key=value run configuration. Values are kept as text so an echoed file
/// parses back to exactly the same run.
class Config {
public:
    Config();

    static const std::vector<ConfigKey>& keys();
    static bool known(std::string_view key);

    /// Unknown keys throw invalid_argument.
    void set(std::string_view key, std::string value);
    [[nodiscard]] const std::string& get(std::string_view key) const;

    /// Lines of key=value; blank lines and lines starting with '#' are skipped.
    void merge_file(const std::filesystem::path& path);
    void merge_text(std::string_view text, const std::string& origin = "config");

    /// Sorted key=value lines, one per key.
    [[nodiscard]] std::string render() const;

    [[nodiscard]] std::uint64_t get_u64(std::string_view key) const;
    [[nodiscard]] std::size_t get_size(std::string_view key) const;
    [[nodiscard]] double get_double(std::string_view key) const;
    [[nodiscard]] bool get_bool(std::string_view key) const;
    [[nodiscard]] std::vector<double> get_doubles(std::string_view key) const;
    [[nodiscard]] std::vector<std::size_t> get_sizes(std::string_view key) const;
    [[nodiscard]] std::vector<std::string> get_words(std::string_view key) const;

    /// Parses every key once; throws invalid_argument naming the first bad one.
    void validate() const;

private:
    std::map<std::string, std::string, std::less<>> values_;
};

DataSource data_source(const Config& c);
TrainSettings first_phase(const Config& c);
TrainSettings second_phase(const Config& c);
MethodSpec method_spec(const Config& c, std::string_view name);
PolicySpec policy_spec(const Config& c);

EvilTwinConfig evil_twin_config(const Config& c);
TaylorConfig taylor_config(const Config& c);
CkaCompareConfig cka_config(const Config& c);
MethodComparisonConfig method_comparison_config(const Config& c);
AblationConfig ablation_config(const Config& c);

} // namespace augforget
