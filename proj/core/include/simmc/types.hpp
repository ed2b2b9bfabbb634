#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace simmc {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Every stochastic step in the library draws from this engine so a run is a
// pure function of its seed.
using Rng = std::mt19937_64;

// A CSV row or checkpoint field could not be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs parse but are structurally inconsistent (mixed K, missing frames...).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was called out of order, e.g. backward() on an empty tape.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A training-path operation tried to read a label it must not see.
class LabelAccessError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace simmc
