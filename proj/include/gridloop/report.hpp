#pragma once

#include <stdexcept>
#include <string>

#include "gridloop/runner.hpp"

namespace gridloop::orch {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CSV/plot/summary emitters. The render_* functions produce the exact bytes
// emit_report writes, so determinism checks can compare in memory.
std::string render_trace_csv(const RunResult& r);
std::string render_summary(const RunResult& r);
std::string render_freq_svg(const RunResult& r);
std::string render_latency_svg(const RunResult& r);

// Writes trace.csv, latency_<link>.csv, summary.txt, freq.svg, latency.svg
// and scenario.snapshot.scn into out_dir (created if missing).
void emit_report(const RunResult& r, const std::string& out_dir);

} // namespace gridloop::orch
