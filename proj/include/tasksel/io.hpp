#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tasksel/errors.hpp"
#include "tasksel/surrogate.hpp"
#include "tasksel/synthworld.hpp"
#include "tasksel/textio.hpp"

namespace tasksel {

inline constexpr std::string_view kModelTag = "taskselmodel v1";
inline constexpr std::string_view kWorldTag = "taskselworld v1";
inline constexpr std::string_view kRunTag = "taskselrun v1";

/// Ordered key-value lines: "key value", '#' comments, blanks skipped.
/// Duplicate keys are an error.
inline std::vector<std::pair<std::string, std::string>> parse_kv(
    std::string_view content, long first_line = 1) {
  std::vector<std::pair<std::string, std::string>> out;
  std::map<std::string, long> seen;
  long line_no = first_line - 1;
  for (std::string_view raw : split(content, '\n')) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::size_t sp = line.find_first_of(" \t");
    std::string key(line.substr(0, sp));
    std::string value(sp == std::string_view::npos ? std::string_view{}
                                                   : trim(line.substr(sp + 1)));
    if (!seen.emplace(key, line_no).second)
      throw parse_error("duplicate key '" + key + "'", line_no);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

namespace detail {

class KvReader {
 public:
  explicit KvReader(std::vector<std::pair<std::string, std::string>> kv)
      : kv_(std::move(kv)) {
    for (const auto& [k, v] : kv_) map_.emplace(k, v);
  }

  bool has(const std::string& key) const { return map_.count(key) != 0; }

  std::string take(const std::string& key) {
    auto it = map_.find(key);
    if (it == map_.end()) throw parse_error("missing key '" + key + "'");
    taken_.insert(key);
    return it->second;
  }

  std::string take_or(const std::string& key, std::string fallback) {
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    taken_.insert(key);
    return it->second;
  }

  /// Keys present in the input but never consumed.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : kv_)
      if (!taken_.count(k)) out.push_back(k);
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> kv_;
  std::map<std::string, std::string> map_;
  std::set<std::string> taken_;
};

}  // namespace detail

inline std::string serialize_model(const SurrogateModel& m) {
  std::string out(kModelTag);
  out += '\n';
  out += "k " + std::to_string(m.k) + '\n';
  out += "alpha " + std::to_string(m.alpha) + '\n';
  out += "n " + std::to_string(m.n) + '\n';
  out += "seed " + std::to_string(m.seed) + '\n';
  out += "train_mse " + fmt_double(m.train_mse) + '\n';
  out += "condition " + fmt_double(m.condition) + '\n';
  for (int i = 0; i < m.k; ++i)
    out += "theta " + std::to_string(i + 1) + ' ' + fmt_double(m.theta[i]) + '\n';
  return out;
}

inline SurrogateModel deserialize_model(std::string_view content) {
  const auto lines = split(content, '\n');
  if (lines.empty() || trim(lines[0]) != kModelTag)
    throw parse_error("not a model file (expected leading '" +
                          std::string(kModelTag) + "')",
                      1);
  SurrogateModel m;
  bool got_k = false, got_alpha = false, got_n = false, got_seed = false,
       got_mse = false, got_cond = false;
  std::vector<bool> got_theta;
  long line_no = 1;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    ++line_no;
    const std::string_view line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, ' ');
    const std::string_view key = fields[0];
    if (key == "k" && fields.size() == 2) {
      m.k = static_cast<int>(parse_int64(fields[1], line_no));
      if (m.k < 1) throw parse_error("k must be >= 1", line_no);
      m.theta = Eigen::VectorXd::Zero(m.k);
      got_theta.assign(static_cast<std::size_t>(m.k), false);
      got_k = true;
    } else if (key == "alpha" && fields.size() == 2) {
      m.alpha = static_cast<int>(parse_int64(fields[1], line_no));
      got_alpha = true;
    } else if (key == "n" && fields.size() == 2) {
      m.n = parse_int64(fields[1], line_no);
      got_n = true;
    } else if (key == "seed" && fields.size() == 2) {
      m.seed = parse_uint64(fields[1], line_no);
      got_seed = true;
    } else if (key == "train_mse" && fields.size() == 2) {
      m.train_mse = parse_double(fields[1], line_no);
      got_mse = true;
    } else if (key == "condition" && fields.size() == 2) {
      m.condition = parse_double(fields[1], line_no);
      got_cond = true;
    } else if (key == "theta" && fields.size() == 3) {
      if (!got_k) throw parse_error("theta before k", line_no);
      const auto idx = parse_int64(fields[1], line_no);
      if (idx < 1 || idx > m.k)
        throw parse_error("theta index " + std::to_string(idx) + " outside 1.." +
                              std::to_string(m.k),
                          line_no);
      if (got_theta[static_cast<std::size_t>(idx - 1)])
        throw parse_error("duplicate theta index " + std::to_string(idx), line_no);
      m.theta[idx - 1] = parse_double(fields[2], line_no);
      got_theta[static_cast<std::size_t>(idx - 1)] = true;
    } else {
      throw parse_error("unrecognized model line '" + std::string(line) + "'",
                        line_no);
    }
  }
  if (!(got_k && got_alpha && got_n && got_seed && got_mse && got_cond))
    throw parse_error("model file is missing required fields");
  for (int i = 0; i < m.k; ++i)
    if (!got_theta[static_cast<std::size_t>(i)])
      throw parse_error("model file is missing theta " + std::to_string(i + 1));
  return m;
}

inline void save_model(const SurrogateModel& m, const std::filesystem::path& path) {
  atomic_write_file(path, serialize_model(m));
}

inline SurrogateModel load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path));
}

inline std::string serialize_world_params(const WorldParams& w) {
  std::string out(kWorldTag);
  out += '\n';
  out += "k " + std::to_string(w.k) + '\n';
  out += "p " + std::to_string(w.p) + '\n';
  out += "d " + std::to_string(w.d) + '\n';
  out += "m " + std::to_string(w.m) + '\n';
  out += "a " + fmt_double(w.a) + '\n';
  out += "b " + fmt_double(w.b) + '\n';
  out += "frac_good " + fmt_double(w.frac_good) + '\n';
  out += "sigma " + fmt_double(w.sigma) + '\n';
  out += "beta_scale " + fmt_double(w.beta_scale) + '\n';
  out += "seed " + std::to_string(w.seed) + '\n';
  return out;
}

inline WorldParams deserialize_world_params(std::string_view content) {
  const auto nl = content.find('\n');
  if (trim(content.substr(0, nl)) != kWorldTag)
    throw parse_error("not a world file (expected leading '" +
                          std::string(kWorldTag) + "')",
                      1);
  detail::KvReader kv(
      parse_kv(nl == std::string_view::npos ? std::string_view{}
                                            : content.substr(nl + 1),
               2));
  WorldParams w;
  w.k = static_cast<int>(parse_int64(kv.take("k")));
  w.p = static_cast<int>(parse_int64(kv.take("p")));
  w.d = parse_int64(kv.take("d"));
  w.m = parse_int64(kv.take("m"));
  w.a = parse_double(kv.take("a"));
  w.b = parse_double(kv.take("b"));
  w.frac_good = parse_double(kv.take("frac_good"));
  w.sigma = parse_double(kv.take("sigma"));
  w.beta_scale = parse_double(kv.take("beta_scale"));
  w.seed = parse_uint64(kv.take("seed"));
  const auto extra = kv.unused();
  if (!extra.empty())
    throw parse_error("unrecognized world key '" + extra.front() + "'");
  validate(w);
  return w;
}

inline void save_world_params(const WorldParams& w,
                              const std::filesystem::path& path) {
  atomic_write_file(path, serialize_world_params(w));
}

inline WorldParams load_world_params(const std::filesystem::path& path) {
  return deserialize_world_params(read_file(path));
}

/// Full world datasets as text, for inspection or external reproduction.
inline std::string dump_world_data(const SyntheticWorld& w) {
  std::string out = "# full datasets for " + std::string(kWorldTag) + "\n";
  out += serialize_world_params(w.params);
  auto dump_matrix = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out += '\t';
        out += fmt_double(m(r, c));
      }
      out += '\n';
    }
  };
  auto dump_vector = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) out += '\t';
      out += fmt_double(v[i]);
    }
    out += '\n';
  };
  for (int i = 0; i <= w.params.k; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out += "[task " + std::to_string(i) + (i == 0 ? " target" : "") +
           (i >= 1 && w.is_good(i) ? " good" : i >= 1 ? " bad" : "") + "]\n";
    out += "beta\t";
    dump_vector(w.beta[idx]);
    out += "x\n";
    dump_matrix(w.x[idx]);
    out += "y\t";
    dump_vector(w.y[idx]);
  }
  out += "[validation target]\nx\n";
  dump_matrix(w.x_val);
  out += "y\t";
  dump_vector(w.y_val);
  return out;
}

}  // namespace tasksel
