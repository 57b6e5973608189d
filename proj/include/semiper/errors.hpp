#pragma once

#include <stdexcept>
#include <string>

namespace semiper {

/// Error raised by the numerical modules. `module()` and `name()` form the
/// qualified name echoed by the CLI, e.g. "periodic_solver.KernelObstruction".
class Error : public std::runtime_error {
public:
    Error(std::string module, std::string name, const std::string& detail)
        : std::runtime_error(module + "." + name + ": " + detail),
          module_(std::move(module)),
          name_(std::move(name)) {}

    const std::string& module() const noexcept { return module_; }
    const std::string& name() const noexcept { return name_; }
    std::string qualified_name() const { return module_ + "." + name_; }

private:
    std::string module_;
    std::string name_;
};

namespace detail {
[[noreturn]] inline void raise(const char* module, const char* name, const std::string& detail) {
    throw Error(module, name, detail);
}
}  // namespace detail

}  // namespace semiper
