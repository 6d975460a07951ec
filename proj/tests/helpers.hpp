#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "knobtune/log.hpp"
#include "oracles.hpp"

namespace testing_support {

inline oracle::Mat to_mat(const Eigen::MatrixXd& m) {
  oracle::Mat out = oracle::zeros(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

/// `per` points around each centre with isotropic noise `sd`.
inline Eigen::MatrixXd blobs(const Eigen::MatrixXd& centres, std::size_t per, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  Eigen::MatrixXd pts(centres.rows() * static_cast<Eigen::Index>(per), centres.cols());
  for (Eigen::Index c = 0; c < centres.rows(); ++c)
    for (std::size_t i = 0; i < per; ++i) {
      const Eigen::Index r = c * static_cast<Eigen::Index>(per) + static_cast<Eigen::Index>(i);
      for (Eigen::Index d = 0; d < centres.cols(); ++d) pts(r, d) = centres(c, d) + nd(rng);
    }
  return pts;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("knobtune_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Collects warnings for the lifetime of the object.
class CaptureWarnings {
 public:
  CaptureWarnings() : sink_([this](std::string_view m) { messages.emplace_back(m); }) {}
  bool any_contains(std::string_view needle) const {
    for (const auto& m : messages)
      if (m.find(needle) != std::string::npos) return true;
    return false;
  }
  std::vector<std::string> messages;

 private:
  knobtune::log::ScopedSink sink_;
};

}  // namespace testing_support
