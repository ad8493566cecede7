#pragma once

#include <cstdint>
#include <vector>

#include "opera/mdp.hpp"

namespace opera {

// Finite class of discriminators v(s, a, s') on a tabular space.
//
// Two layouts. A listed class stores each element as a dense table whose row
// s*A + a holds v(s, a, .). An assembled class is generated by a base list of
// next-state functions u: every element picks one base function per (s, a)
// cell, so it has |base|^(S*A) members addressed in mixed radix (cell 0 is
// the least significant digit).
class DiscriminatorClass {
 public:
  static DiscriminatorClass trivial(int num_states, int num_actions);
  static DiscriminatorClass listed(int num_states, int num_actions, std::vector<Matrix> tables);
  static DiscriminatorClass assembled(int num_states, int num_actions, std::vector<Vector> base);
  // Distinct signed indicators of next-state subsets: the zero function and
  // +-1_A for every nonempty A. Closed under negation and assembly.
  static DiscriminatorClass indicator_family(int num_states, int num_actions, double bound = 1.0);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  bool is_assembled() const { return assembled_; }

  // Cardinality; saturates at INT64_MAX for huge assembled classes.
  std::int64_t size() const;
  double log_size() const;

  double value(std::int64_t k, int s, int a, int next) const;

  // Cell/unit view used by the confidence sets. For assembled classes a cell
  // is an (s, a) pair and a unit a base function; for listed classes there is
  // a single cell and the units are the elements themselves.
  int num_cells() const { return assembled_ ? num_states_ * num_actions_ : 1; }
  int num_units() const { return static_cast<int>(assembled_ ? base_.size() : tables_.size()); }
  int cell_of(int s, int a) const { return assembled_ ? s * num_actions_ + a : 0; }
  double unit_value(int u, int s, int a, int next) const {
    return assembled_ ? base_[u](next) : tables_[u](s * num_actions_ + a, next);
  }
  // Element that uses unit u on the given cell and unit 0 elsewhere.
  std::int64_t element_with(int cell, int u) const;
  // Element that uses choice[c] on cell c.
  std::int64_t element_from_choices(const std::vector<int>& choice) const;
  int choice_at(std::int64_t k, int cell) const;

  double bound() const;
  // Membership scan: -v in the class for every v.
  bool is_symmetric(double tol = 1e-12) const;
  // Sup-norm distance between two elements.
  double distance(std::int64_t i, std::int64_t j) const;

 private:
  int num_states_ = 1;
  int num_actions_ = 1;
  bool assembled_ = false;
  std::vector<Matrix> tables_;
  std::vector<Vector> base_;
};

}  // namespace opera
