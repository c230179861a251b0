#pragma once

#include <stdexcept>
#include <string>

namespace tasksel {

/// Bad argument or configuration value. CLI maps this to exit code 2.
class invalid_parameter_error : public std::invalid_argument {
 public:
  explicit invalid_parameter_error(const std::string& what)
      : std::invalid_argument(what) {}
};

/// Normal-equations (or pooled Gram) matrix is rank deficient. Exit code 3.
class singular_design_error : public std::runtime_error {
 public:
  explicit singular_design_error(const std::string& what)
      : std::runtime_error(what) {}
};

/// External oracle protocol violation (duplicate ids, bad status, ...). Exit code 4.
class protocol_error : public std::runtime_error {
 public:
  explicit protocol_error(const std::string& what)
      : std::runtime_error(what) {}
};

/// Malformed file content. Carries a 1-based line number when known. Exit code 4
/// for oracle files, 5 for model/world/record files.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& what, long line)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")"
                                    : what),
        line_(line) {}
  explicit parse_error(const std::string& what) : parse_error(what, 0) {}
  long line() const { return line_; }

 private:
  long line_ = 0;
};

/// Filesystem failure (unreadable, unwritable). Exit code 5.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Rank correlation is undefined (fewer than two points, or a constant side).
class undefined_correlation_error : public std::domain_error {
 public:
  explicit undefined_correlation_error(const std::string& what)
      : std::domain_error(what) {}
};

/// A grid-search candidate evaluation threw; remembers the gamma being tried.
class evaluation_error : public std::runtime_error {
 public:
  evaluation_error(const std::string& what, double gamma)
      : std::runtime_error(what), gamma_(gamma) {}
  double gamma() const { return gamma_; }

 private:
  double gamma_;
};

}  // namespace tasksel
