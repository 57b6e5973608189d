#pragma once

#include "semiper/cli.hpp"
#include "semiper/forcing.hpp"
#include "semiper/models.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace semiper::cli {

[[noreturn]] void config_error(const std::string& path, const std::string& detail);

/// Typed view of one JSON object; remembers which keys were read so that
/// unknown keys can be reported.
class Reader {
public:
    Reader(const Json& j, std::string path);

    bool has(const std::string& key) const;
    const std::string& path() const { return path_; }

    double num(const std::string& key) ;
    double num(const std::string& key, double fallback);
    double positive(const std::string& key);
    double positive(const std::string& key, double fallback);
    int integer(const std::string& key);
    int integer(const std::string& key, int fallback);
    std::string str(const std::string& key);
    std::string str(const std::string& key, const std::string& fallback);
    bool flag(const std::string& key, bool fallback);
    std::vector<double> numbers(const std::string& key);
    std::vector<int> integers(const std::string& key);
    std::pair<double, double> window(const std::string& key);
    std::optional<std::pair<double, double>> optional_window(const std::string& key);
    std::vector<double> grid(const std::string& key);
    Reader obj(const std::string& key);
    const Json& raw(const std::string& key);

    /// Raises cli.InvalidConfig for keys that were never read.
    void done() const;

private:
    const Json& get(const std::string& key);
    std::string at(const std::string& key) const { return path_ + "." + key; }

    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

/// Model plus the damping profile used to build it (sphere blocks keep the block).
struct BuiltModel {
    ModelPtr model;
    std::string builder;
    std::optional<SphereBlockModel> sphere;
    double length = 1.0;
};

DampingProfile parse_damping(Reader r);
BuiltModel build_model(Reader r);
Vec build_vector(const BuiltModel& m, Reader r, Index dim);
TimeProfile parse_profile(Reader r);
PeriodicForcing build_forcing(const BuiltModel& m, Reader r, Index dim);

Json fit_json(const FitRecord& fit);
Json vec_json(const Vec& v);

}  // namespace semiper::cli
