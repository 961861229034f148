#include "gridloop/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gridloop/scenario.hpp"

namespace gridloop::orch {

namespace {

std::string seconds_text(Micros us) {
    return format_double(static_cast<double>(us) / 1e6);
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + path);
}

// Minimal line-plot scaffolding shared by both charts.
struct Axes {
    double x0, x1, y0, y1;                  // data ranges
    static constexpr int w = 800, h = 400;  // canvas
    static constexpr int ml = 60, mr = 15, mt = 15, mb = 40;

    double px(double x) const {
        double span = x1 > x0 ? x1 - x0 : 1.0;
        return ml + (x - x0) / span * (w - ml - mr);
    }
    double py(double y) const {
        double span = y1 > y0 ? y1 - y0 : 1.0;
        return h - mb - (y - y0) / span * (h - mt - mb);
    }
};

std::string svg_num(double v) {
    double r = std::round(v * 100.0) / 100.0;
    if (r == 0.0) r = 0.0; // normalize -0
    return format_double(r);
}

void svg_open(std::string& s) {
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 400\" "
         "font-family=\"monospace\" font-size=\"11\">\n";
    s += "<rect width=\"800\" height=\"400\" fill=\"white\"/>\n";
}

void svg_frame(std::string& s, const Axes& a, const std::string& x_label,
               const std::string& y_label) {
    s += "<rect x=\"" + svg_num(a.ml) + "\" y=\"" + svg_num(a.mt) + "\" width=\"" +
         svg_num(Axes::w - a.ml - a.mr) + "\" height=\"" +
         svg_num(Axes::h - a.mt - a.mb) +
         "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (int i = 0; i <= 6; ++i) {
        double x = a.x0 + (a.x1 - a.x0) * i / 6.0;
        double px = a.px(x);
        s += "<line x1=\"" + svg_num(px) + "\" y1=\"" + svg_num(Axes::h - a.mb) +
             "\" x2=\"" + svg_num(px) + "\" y2=\"" + svg_num(Axes::h - a.mb + 4) +
             "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + svg_num(px) + "\" y=\"" + svg_num(Axes::h - a.mb + 16) +
             "\" text-anchor=\"middle\">" + svg_num(x) + "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        double y = a.y0 + (a.y1 - a.y0) * i / 5.0;
        double py = a.py(y);
        s += "<line x1=\"" + svg_num(a.ml - 4) + "\" y1=\"" + svg_num(py) + "\" x2=\"" +
             svg_num(a.ml) + "\" y2=\"" + svg_num(py) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + svg_num(a.ml - 7) + "\" y=\"" + svg_num(py + 4) +
             "\" text-anchor=\"end\">" + svg_num(y) + "</text>\n";
    }
    s += "<text x=\"" + svg_num((a.ml + Axes::w - a.mr) / 2.0) + "\" y=\"" +
         svg_num(Axes::h - 6) + "\" text-anchor=\"middle\">" + x_label + "</text>\n";
    s += "<text x=\"14\" y=\"" + svg_num((a.mt + Axes::h - a.mb) / 2.0) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         svg_num((a.mt + Axes::h - a.mb) / 2.0) + ")\">" + y_label + "</text>\n";
}

} // namespace

std::string render_trace_csv(const RunResult& r) {
    int n = r.scenario.ess_count;
    std::string out = "t_us,f_hz,p_pv_pu,p_building_pu,p_load2_pu";
    for (int i = 1; i <= n; ++i) out += ",p_ess" + std::to_string(i) + "_pu";
    for (int i = 1; i <= n; ++i) out += ",u" + std::to_string(i) + "_hz";
    out += "\n";
    for (const auto& row : r.trace) {
        out += std::to_string(row.t_us);
        out += ',' + format_double(row.f);
        out += ',' + format_double(row.p_pv);
        out += ',' + format_double(row.p_building);
        out += ',' + format_double(row.p_load2);
        for (int i = 0; i < n; ++i)
            out += ',' + format_double(
                             i < static_cast<int>(row.p_ess.size())
                                 ? row.p_ess[static_cast<std::size_t>(i)]
                                 : 0.0);
        for (int i = 0; i < n; ++i)
            out += ',' + format_double(i < static_cast<int>(row.u.size())
                                           ? row.u[static_cast<std::size_t>(i)]
                                           : 0.0);
        out += '\n';
    }
    return out;
}

std::string render_summary(const RunResult& r) {
    const auto& s = r.scenario;
    std::string out;
    out += "run: horizon " + seconds_text(s.horizon_us) + " s, mode " +
           (s.mode == RunMode::virtual_time ? "virtual" : "realtime") + ", seed " +
           std::to_string(s.seed) + ", " + std::to_string(s.ess_count) + " ESS units\n";
    if (r.wall_seconds > 0.0)
        out += "wall clock: " + format_double(r.wall_seconds) + " s\n";

    if (r.trace.empty()) {
        out += "trace: empty\n";
    } else {
        double fmin = r.trace.front().f, fmax = fmin;
        for (const auto& row : r.trace) {
            fmin = std::min(fmin, row.f);
            fmax = std::max(fmax, row.f);
        }
        out += "trace: " + std::to_string(r.trace.size()) + " rows, f in [" +
               format_double(fmin) + ", " + format_double(fmax) + "] Hz, final " +
               format_double(r.trace.back().f) + " Hz\n";
    }

    auto windows = settling_windows(r, 0.02);
    for (const auto& w : windows) {
        out += "disturbance t=" + seconds_text(w.t_us) + " s (" + w.label +
               "): max |f - f_nom| = " + format_double(w.max_dev_hz) + " Hz, ";
        if (w.settled && w.settle_us == 0)
            out += "stayed within 0.02 Hz\n";
        else if (w.settled)
            out += "settled to 0.02 Hz in " + seconds_text(w.settle_us) + " s\n";
        else
            out += "not settled within its window\n";
    }

    for (const auto& l : r.links) {
        auto st = l.stats.stats();
        if (st.count == 0) {
            out += "link " + l.name + ": no traffic\n";
            continue;
        }
        out += "link " + l.name + ": " + std::to_string(st.count) +
               " messages, mean delay " + format_double(st.mean_ms) + " ms, max " +
               format_double(st.max_ms) + " ms, " + std::to_string(st.reorder_count) +
               " reorderings\n";
    }

    if (r.cycles.empty()) {
        out += "consensus: no completed cycles\n";
    } else {
        int imin = r.cycles.front().iters, imax = imin;
        double isum = 0.0;
        for (const auto& c : r.cycles) {
            imin = std::min(imin, c.iters);
            imax = std::max(imax, c.iters);
            isum += c.iters;
        }
        out += "consensus: " + std::to_string(r.cycles.size()) +
               " completed cycles, rounds min/mean/max " + std::to_string(imin) + "/" +
               format_double(isum / static_cast<double>(r.cycles.size())) + "/" +
               std::to_string(imax) + ", " + std::to_string(r.stale_rounds) +
               " stale messages, " + std::to_string(r.skipped_cycles) +
               " skipped cycles\n";
    }

    for (const auto& v : r.verdicts)
        out += std::string(v.informational ? "note" : (v.pass ? "pass" : "FAIL")) + " " +
               v.name + ": " + v.detail + "\n";
    return out;
}

std::string render_freq_svg(const RunResult& r) {
    const auto& s = r.scenario;
    std::string out;
    svg_open(out);
    if (r.trace.empty()) {
        out += "<text x=\"400\" y=\"200\" text-anchor=\"middle\">no trace</text>\n</svg>\n";
        return out;
    }
    double fmin = s.f_nom_hz - 0.03, fmax = s.f_nom_hz + 0.03;
    for (const auto& row : r.trace) {
        fmin = std::min(fmin, row.f);
        fmax = std::max(fmax, row.f);
    }
    double pad = (fmax - fmin) * 0.05;
    Axes a{0.0, static_cast<double>(s.horizon_us) / 1e6, fmin - pad, fmax + pad};
    svg_frame(out, a, "t [s]", "f [Hz]");
    for (double band : {s.f_nom_hz - 0.02, s.f_nom_hz, s.f_nom_hz + 0.02}) {
        out += "<line x1=\"" + svg_num(a.px(a.x0)) + "\" y1=\"" + svg_num(a.py(band)) +
               "\" x2=\"" + svg_num(a.px(a.x1)) + "\" y2=\"" + svg_num(a.py(band)) +
               "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    }
    for (const auto& d : s.disturbances) {
        if (d.t_us >= s.horizon_us) continue;
        double px = a.px(static_cast<double>(d.t_us) / 1e6);
        out += "<line x1=\"" + svg_num(px) + "\" y1=\"" + svg_num(a.py(a.y1)) +
               "\" x2=\"" + svg_num(px) + "\" y2=\"" + svg_num(a.py(a.y0)) +
               "\" stroke=\"#c66\" stroke-dasharray=\"2 3\"/>\n";
    }
    out += "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.2\" points=\"";
    for (const auto& row : r.trace)
        out += svg_num(a.px(static_cast<double>(row.t_us) / 1e6)) + "," +
               svg_num(a.py(row.f)) + " ";
    out += "\"/>\n</svg>\n";
    return out;
}

std::string render_latency_svg(const RunResult& r) {
    static const char* colors[] = {"#1f4e9c", "#b0621a", "#2e7d32", "#7b1fa2"};
    std::string out;
    svg_open(out);
    double tmax = 1.0, dmax = 1.0;
    bool any = false;
    for (const auto& l : r.links)
        for (const auto& rec : l.stats.records()) {
            any = true;
            tmax = std::max(tmax, static_cast<double>(rec.send_ts_us) / 1e6);
            dmax = std::max(dmax, micros_to_ms(rec.delivery_ts_us - rec.send_ts_us));
        }
    if (!any) {
        out += "<text x=\"400\" y=\"200\" text-anchor=\"middle\">no messages</text>\n</svg>\n";
        return out;
    }
    Axes a{0.0, tmax, 0.0, dmax * 1.05};
    svg_frame(out, a, "send time [s]", "delay [ms]");
    int ci = 0;
    double ly = 30.0;
    for (const auto& l : r.links) {
        if (l.stats.records().empty()) continue;
        const char* color = colors[ci++ % 4];
        for (const auto& rec : l.stats.records())
            out += "<circle cx=\"" +
                   svg_num(a.px(static_cast<double>(rec.send_ts_us) / 1e6)) + "\" cy=\"" +
                   svg_num(a.py(micros_to_ms(rec.delivery_ts_us - rec.send_ts_us))) +
                   "\" r=\"1.5\" fill=\"" + color + "\"/>\n";
        out += "<text x=\"" + svg_num(Axes::w - 120) + "\" y=\"" + svg_num(ly) +
               "\" fill=\"" + color + "\">" + l.name + "</text>\n";
        ly += 14.0;
    }
    out += "</svg>\n";
    return out;
}

void emit_report(const RunResult& r, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
    write_file(out_dir + "/trace.csv", render_trace_csv(r));
    for (const auto& l : r.links)
        write_file(out_dir + "/latency_" + l.name + ".csv", l.stats.to_csv());
    write_file(out_dir + "/summary.txt", render_summary(r));
    write_file(out_dir + "/freq.svg", render_freq_svg(r));
    write_file(out_dir + "/latency.svg", render_latency_svg(r));
    // the snapshot must re-run from inside the result directory, so profile
    // paths are pinned down to absolute ones
    Scenario snap = r.scenario;
    for (std::string* p : {&snap.pv_path, &snap.building_path})
        if (!p->empty())
            *p = std::filesystem::absolute(*p).lexically_normal().string();
    write_file(out_dir + "/scenario.snapshot.scn", print_scenario(snap));
}

} // namespace gridloop::orch
