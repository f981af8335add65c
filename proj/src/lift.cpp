#include "koopnav/lift.hpp"

namespace koopnav {

LiftSpec LiftSpec::timedelay(int n) {
  if (n < 1) throw ConfigError("timedelay lift needs n >= 1");
  return {LiftKind::TimeDelay, n};
}

int LiftSpec::dim() const {
  switch (kind) {
    case LiftKind::Identity:
      return 6;
    case LiftKind::Poly3:
      // 6 monomials of degree 1, 21 of degree 2, 56 of degree 3, constant.
      return 6 + 21 + 56 + 1;
    case LiftKind::TimeDelay:
      return 6 * delay;
  }
  throw NumericError("unreachable lift kind");
}

std::string LiftSpec::name() const {
  switch (kind) {
    case LiftKind::Identity:
      return "identity";
    case LiftKind::Poly3:
      return "poly3";
    case LiftKind::TimeDelay:
      return "td:" + std::to_string(delay);
  }
  throw NumericError("unreachable lift kind");
}

LiftSpec LiftSpec::parse(const std::string& text) {
  if (text == "identity") return identity();
  if (text == "poly3") return poly3();
  if (text.rfind("td:", 0) == 0) {
    int n = 0;
    try {
      n = std::stoi(text.substr(3));
    } catch (const std::exception&) {
      throw ConfigError("bad lift spec '" + text + "'");
    }
    return timedelay(n);
  }
  throw ConfigError("bad lift spec '" + text + "' (want identity, poly3 or td:N)");
}

void lift(const LiftSpec& spec, std::span<const State> history,
          Eigen::Ref<Eigen::VectorXd> out) {
  if (history.empty()) throw ConfigError("lift: empty history");
  if (out.size() != spec.dim()) throw ConfigError("lift: output size mismatch");
  const State& x = history.back();

  switch (spec.kind) {
    case LiftKind::Identity:
      out = x.vec();
      return;

    case LiftKind::Poly3: {
      const Vec6 v = x.vec();
      out.head<6>() = v;
      int idx = 6;
      for (int i = 0; i < 6; ++i) {
        for (int j = i; j < 6; ++j) {
          out[idx++] = v[i] * v[j];
        }
      }
      for (int i = 0; i < 6; ++i) {
        for (int j = i; j < 6; ++j) {
          for (int k = j; k < 6; ++k) {
            out[idx++] = v[i] * v[j] * v[k];
          }
        }
      }
      out[idx] = 1.0;
      return;
    }

    case LiftKind::TimeDelay: {
      const std::ptrdiff_t have = static_cast<std::ptrdiff_t>(history.size());
      for (int d = 0; d < spec.delay; ++d) {
        const std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, have - 1 - d);
        out.segment<6>(6 * d) = history[i].vec();
      }
      return;
    }
  }
  throw NumericError("unreachable lift kind");
}

Eigen::VectorXd lift_vec(const LiftSpec& spec,
                         std::span<const State> history) {
  Eigen::VectorXd out(spec.dim());
  lift(spec, history, out);
  return out;
}

}  // namespace koopnav
