#pragma once

#include <span>
#include <string>

#include <Eigen/Core>

#include "koopnav/types.hpp"

namespace koopnav {

enum class LiftKind { Identity, Poly3, TimeDelay };

/// Choice of lifting dictionary. The lifted vector always starts with the
/// raw 6-dim state so the first-six projection recovers it.
///   identity      p = 6
///   poly3         p = 84: state, then all degree-2 and degree-3 monomials
///                 in graded-lexicographic order, then the constant 1
///   timedelay(n)  p = 6n: current state first, then n-1 predecessors
struct LiftSpec {
  LiftKind kind = LiftKind::Identity;
  int delay = 1;

  static LiftSpec identity() { return {LiftKind::Identity, 1}; }
  static LiftSpec poly3() { return {LiftKind::Poly3, 1}; }
  static LiftSpec timedelay(int n);

  /// Lifted dimension p.
  int dim() const;

  /// Name used in CLI flags and model files: "identity", "poly3", "td:N".
  std::string name() const;
  static LiftSpec parse(const std::string& text);

  bool operator==(const LiftSpec&) const = default;
};

/// Lifts a chronological state history (last element = current state) into
/// `out`, which must have spec.dim() entries. Missing history at a sequence
/// start is padded by replicating the earliest provided state.
void lift(const LiftSpec& spec, std::span<const State> history,
          Eigen::Ref<Eigen::VectorXd> out);

Eigen::VectorXd lift_vec(const LiftSpec& spec, std::span<const State> history);

}  // namespace koopnav
