#include "vmfb/trace.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace vmfb {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::max_iterations:
      return "max_iterations";
    case Termination::diverged:
      return "diverged";
    case Termination::non_finite:
      return "non_finite";
  }
  return "unknown";
}

void SolveTrace::push(IterationRecord r) {
  if (!records.empty() && r.n != records.back().n + 1) {
    throw InvalidArgument("SolveTrace: records must be indexed contiguously");
  }
  if (records.empty() && r.n != 0) throw InvalidArgument("SolveTrace: first record must be n = 0");
  records.push_back(std::move(r));
}

namespace {

void put(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

void write_csv(const SolveTrace& trace, std::ostream& out, bool deterministic) {
  out << kTraceHeader << "\n";
  for (const auto& r : trace.records) {
    out << r.n << ',';
    put(out, r.residual);
    out << ',';
    put(out, r.gamma);
    out << ',';
    put(out, r.lambda);
    out << ',';
    put(out, r.fejer_lhs);
    out << ',';
    put(out, r.fejer_rhs);
    out << ',';
    put(out, r.b_drift);
    out << ',' << (deterministic ? 0 : r.wall_clock_ns) << '\n';
  }
}

void write_csv(const SolveTrace& trace, const std::string& path, bool deterministic) {
  std::ofstream f(path);
  if (!f) throw Error("write_csv: cannot open " + path);
  write_csv(trace, f, deterministic);
  if (!f) throw Error("write_csv: write failed for " + path);
}

}  // namespace vmfb
