#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "spock/problem.hpp"
#include "spock/solver.hpp"

namespace spock {

// Self-describing container: a human-diffable text header for integer and
// string metadata plus named little-endian binary payloads (f64/i64,
// row-major) for exact numerics. Insertion order is preserved so that
// load-then-save round-trips byte for byte.
class Document {
 public:
  void put_int(const std::string& name, int64_t v);
  void put_str(const std::string& name, const std::string& v);
  void put_mat(const std::string& name, const Eigen::MatrixXd& m);
  void put_vec(const std::string& name, const Eigen::VectorXd& v);
  void put_ints(const std::string& name, const std::vector<int>& v);

  int64_t get_int(const std::string& name) const;
  std::string get_str(const std::string& name) const;
  Eigen::MatrixXd get_mat(const std::string& name) const;
  Eigen::VectorXd get_vec(const std::string& name) const;
  std::vector<int> get_ints(const std::string& name) const;
  bool has(const std::string& name) const;

  void save(const std::string& path, const std::string& magic) const;
  static Document load(const std::string& path, const std::string& expected_magic);

 private:
  struct Meta {
    char tag;  // 'i' or 's'
    std::string name, value;
  };
  struct Arr {
    std::string name;
    char dtype;  // 'f' or 'l'
    int64_t rows = 0, cols = 0;
    std::vector<double> f64;
    std::vector<int64_t> i64;
  };
  std::vector<Meta> meta_;
  std::vector<Arr> arrays_;
  const Arr& find_arr(const std::string& name) const;
};

// Problem files ("spock-problem v1"). Setting include_soc_translations embeds
// the derived per-node SOC translation vectors for inspection; loaders always
// rederive them from the cost data.
void save_problem(const std::string& path, const Raocp& p, bool include_soc_translations = false);
Raocp load_problem(const std::string& path);

// Solution files ("spock-solution v1").
void save_solution(const std::string& path, const SolveResult& r);
SolveResult load_solution(const std::string& path);

}  // namespace spock
