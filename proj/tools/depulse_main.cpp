// depulse: find and remove long low-frequency pulses in mono WAV recordings.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "depulse/csv.hpp"
#include "depulse/detector.hpp"
#include "depulse/errors.hpp"
#include "depulse/gibbs.hpp"
#include "depulse/pipeline.hpp"
#include "depulse/signal.hpp"
#include "depulse/version.hpp"
#include "depulse/wav.hpp"

namespace {

using namespace depulse;

constexpr int kExitUsage = 1;
constexpr int kExitNoPulse = 2;
constexpr int kExitNumeric = 3;

struct DetectorFlags {
    DetectorConfig cfg;
    void attach(CLI::App* cmd) {
        cmd->add_option("--L", cfg.block_len, "Detector block length (samples)")
            ->capture_default_str();
        cmd->add_option("--xi", cfg.xi, "Detection threshold on the normalized delta-mu")
            ->capture_default_str();
        cmd->add_option("--c", cfg.median_len, "Median filter window (odd)")
            ->capture_default_str();
        cmd->add_option("--fco", cfg.f_co_hz, "Cutoff frequency in Hz")->capture_default_str();
        cmd->add_flag("--no-normalize", [this](std::int64_t) { cfg.normalize = false; },
                      "Use the raw mu - mu_m excursion (xi becomes absolute)");
    }
};

void log_kv(const std::string& key, const std::string& value) {
    std::cerr << "config: " << key << " = " << value << "\n";
}

std::string interval(double lo, double hi) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "[%.6g; %.6g]", lo, hi);
    return buf;
}

std::string chain_path_for_pulse(const std::string& base, std::size_t idx, std::size_t total) {
    if (total <= 1) return base;
    const auto dot = base.rfind('.');
    if (dot == std::string::npos || dot == 0)
        return base + ".pulse" + std::to_string(idx + 1);
    return base.substr(0, dot) + ".pulse" + std::to_string(idx + 1) + base.substr(dot);
}

void write_chain_csv(const std::string& path, const Chain& chain, std::size_t excerpt_start,
                     uint64_t seed) {
    std::vector<std::string> cols = {"iteration", "n0", "M", "sigma_d2"};
    if (chain.kind == TailModelKind::kShape) {
        for (const char* c : {"V_t", "tau_m", "tau_f", "f_max", "f_min", "phi"}) cols.push_back(c);
        cols.push_back("loc_accepted");
        for (const char* c : {"acc_tau_m", "acc_tau_f", "acc_f_max", "acc_f_min", "acc_phi"})
            cols.push_back(c);
    } else {
        cols.push_back("vt_norm");
        cols.push_back("loc_accepted");
    }
    CsvWriter w(path, seed, cols);
    std::vector<double> row;
    for (std::size_t k = 0; k < chain.states.size(); ++k) {
        const ChainState& s = chain.states[k];
        row.clear();
        row.push_back(static_cast<double>(k + 1));
        row.push_back(static_cast<double>(s.n0 + excerpt_start + 1));  // 1-based global
        row.push_back(s.m);
        row.push_back(s.sigma_d2);
        if (chain.kind == TailModelKind::kShape) {
            row.insert(row.end(), {s.shape.v_t, s.shape.tau_m, s.shape.tau_f, s.shape.f_max,
                                   s.shape.f_min, s.shape.phi});
            row.push_back(s.loc_accepted ? 1.0 : 0.0);
            for (int i = 0; i < kShapeParamCount; ++i)
                row.push_back(static_cast<double>(s.shape_accepted[i]));
        } else {
            row.push_back(s.v_t.norm());
            row.push_back(s.loc_accepted ? 1.0 : 0.0);
        }
        w.row(row);
    }
}

int run_detect(const std::string& input, const DetectorFlags& df, const std::string& dump_mu,
               uint64_t seed) {
    const Signal s = read_wav(input);
    log_kv("input", input);
    log_kv("L", std::to_string(df.cfg.block_len));
    log_kv("xi", std::to_string(df.cfg.xi));
    log_kv("c", std::to_string(df.cfg.median_len));
    log_kv("fco", std::to_string(df.cfg.f_co_hz));
    log_kv("normalize", df.cfg.normalize ? "true" : "false");

    const DetectorTrace trace = detector_trace(s, df.cfg);
    if (!dump_mu.empty()) {
        CsvWriter w(dump_mu, seed, {"b", "mu", "mu_m", "delta_mu"});
        for (std::size_t b = 0; b < trace.mu.size(); ++b)
            w.row({static_cast<double>(b + 1), trace.mu[b], trace.mu_m[b], trace.delta[b]});
    }
    const std::vector<Detection> dets = detect_pulses(s, df.cfg, trace);
    for (const Detection& d : dets)
        std::printf("n0=%zu M=%zu score=%.4f\n", d.n0 + 1, d.m, d.score);
    return 0;
}

int run_restore(CLI::App* cmd) {
    static std::string input, output, reference, dump_chain, report_path, model_name = "gp";
    static DetectorFlags df;
    static RestoreConfig cfg;
    static int iters = -1, burnin = -1;
    static bool strict = false;
    static uint64_t seed = 0;

    cmd->add_option("input", input, "Degraded WAV file")->required();
    cmd->add_option("-o,--out", output, "Restored WAV file (default: <input>.restored.wav)");
    cmd->add_option("--model", model_name, "Tail model: gp or shape")->capture_default_str();
    cmd->add_option("--iters", iters, "Chain iterations (default 200 gp / 1000 shape)");
    cmd->add_option("--burnin", burnin, "Burn-in iterations (default 150 gp / 500 shape)");
    cmd->add_option("--thin", cfg.sampler.thin, "Keep one sample in this many")
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Master seed")->capture_default_str();
    cmd->add_option("--fade", cfg.fade_len, "Tail fade-out length in samples")
        ->capture_default_str();
    cmd->add_option("--excerpt-len", cfg.excerpt_len, "Per-pulse excerpt length")
        ->capture_default_str();
    cmd->add_option("--excerpt-offset", cfg.excerpt_offset, "n0 position inside the excerpt")
        ->capture_default_str();
    cmd->add_option("--ar-order", cfg.ar_order, "AR model order")->capture_default_str();
    cmd->add_option("--ar-fit-len", cfg.ar_fit_len, "Samples before n0 used for the AR fit")
        ->capture_default_str();
    cmd->add_option("--loc-width", cfg.sampler.loc_proposal_width,
                    "Support length of the (n0, M) proposals")
        ->capture_default_str();
    cmd->add_flag("--shape-block-mh", cfg.sampler.shape_block_proposal,
                  "Propose all shape parameters jointly instead of one at a time");
    cmd->add_flag("--fade-shape", cfg.fade_shape_model, "Apply the fade-out in shape mode too");
    cmd->add_option("--jobs", cfg.jobs, "Pulses processed in parallel")->capture_default_str();
    cmd->add_option("--reference", reference, "Clean WAV for SNR reporting");
    cmd->add_option("--dump-chain", dump_chain, "Write per-pulse chain CSV to this path");
    cmd->add_option("--report", report_path, "Report CSV path (default: <out>.report.csv)");
    cmd->add_flag("--strict", strict, "Fail (exit 3) if any pulse could not be restored");
    df.attach(cmd);

    cmd->callback([&]() {
        if (model_name != "gp" && model_name != "shape")
            throw CLI::ValidationError("--model must be gp or shape");
        cfg.model = model_name == "gp" ? TailModelKind::kGp : TailModelKind::kShape;
        const bool gp = cfg.model == TailModelKind::kGp;
        cfg.sampler.iterations = iters > 0 ? iters : (gp ? 200 : 1000);
        cfg.sampler.burn_in = burnin >= 0 ? burnin : (gp ? 150 : 500);
        cfg.seed = seed;
        if (output.empty()) output = input + ".restored.wav";
        if (report_path.empty()) report_path = output + ".report.csv";

        const Signal degraded = read_wav(input);
        log_kv("input", input);
        log_kv("output", output);
        log_kv("model", model_name);
        log_kv("iters", std::to_string(cfg.sampler.iterations));
        log_kv("burnin", std::to_string(cfg.sampler.burn_in));
        log_kv("thin", std::to_string(cfg.sampler.thin));
        log_kv("seed", std::to_string(seed));
        log_kv("excerpt_len", std::to_string(cfg.excerpt_len));
        log_kv("ar_order", std::to_string(cfg.ar_order));
        log_kv("ar_fit_len", std::to_string(cfg.ar_fit_len));
        log_kv("fade", std::to_string(cfg.fade_len));
        log_kv("L", std::to_string(df.cfg.block_len));
        log_kv("xi", std::to_string(df.cfg.xi));
        log_kv("c", std::to_string(df.cfg.median_len));
        log_kv("fco", std::to_string(df.cfg.f_co_hz));

        const std::vector<Detection> dets = detect_pulses(degraded, df.cfg);
        std::printf("detected %zu pulse(s)\n", dets.size());

        if (!dump_chain.empty())
            cfg.on_chain = [&, total = dets.size()](std::size_t i, std::size_t start,
                                                    const Chain& chain) {
                write_chain_csv(chain_path_for_pulse(dump_chain, i, total), chain, start,
                                chain.config.seed);
            };

        auto [restored, report] = restore_signal(degraded, dets, cfg);

        write_wav(output, restored);

        double snr_before = NAN, snr_after = NAN;
        if (!reference.empty()) {
            const Signal clean = read_wav(reference);
            snr_before = snr_db(clean, degraded);
            snr_after = snr_db(clean, restored);
            std::printf("SNR before: %.4f dB, after: %.4f dB\n", snr_before, snr_after);
        }

        const bool shape = cfg.model == TailModelKind::kShape;
        std::vector<std::string> cols = {"pulse",      "n0_det",  "M_det",   "score",
                                         "ok",         "n0_mean", "n0_lo",   "n0_hi",
                                         "M_mean",     "M_lo",    "M_hi",    "sigma_d2_mean",
                                         "sigma_d2_lo","sigma_d2_hi"};
        if (shape)
            for (const char* p : {"V_t", "tau_m", "tau_f", "f_max", "f_min", "phi"})
                for (const char* s2 : {"_mean", "_lo", "_hi"}) cols.push_back(std::string(p) + s2);
        cols.insert(cols.end(), {"loc_rate_all", "loc_rate_post"});
        if (shape)
            for (const char* p : {"tau_m", "tau_f", "f_max", "f_min", "phi"})
                cols.push_back(std::string("rate_") + p);
        cols.insert(cols.end(), {"snr_before", "snr_after", "wall_ms"});
        CsvWriter w(report_path, seed, cols);

        bool any_failed = false;
        for (std::size_t i = 0; i < report.pulses.size(); ++i) {
            const PulseReport& r = report.pulses[i];
            if (!r.ok) {
                any_failed = true;
                std::fprintf(stderr, "warning: pulse %zu at n0=%zu failed: %s\n", i + 1,
                             r.detection.n0 + 1, r.error.c_str());
                std::printf("pulse %zu: n0=%zu FAILED (%s)\n", i + 1, r.detection.n0 + 1,
                            r.error.c_str());
                continue;
            }
            const PosteriorEstimate& e = r.estimate;
            const double off = static_cast<double>(r.excerpt_start) + 1.0;  // to 1-based global
            std::printf("pulse %zu: n0 %s mean %.1f, M %s mean %.1f, sigma_d2 %s mean %.4g, "
                        "loc acc %.4f/%.4f, %.0f ms\n",
                        i + 1, interval(e.n0.lo + off, e.n0.hi + off).c_str(), e.n0.mean + off,
                        interval(e.m.lo, e.m.hi).c_str(), e.m.mean,
                        interval(e.sigma_d2.lo, e.sigma_d2.hi).c_str(), e.sigma_d2.mean,
                        r.loc_rate_all, r.loc_rate_post, r.wall_ms);
            if (shape && e.shape) {
                static const char* names[6] = {"V_t", "tau_m", "tau_f", "f_max", "f_min", "phi"};
                for (int p = 0; p < 6; ++p)
                    std::printf("  %s: mean %.6g %s\n", names[p], (*e.shape)[p].mean,
                                interval((*e.shape)[p].lo, (*e.shape)[p].hi).c_str());
            }
            std::vector<double> row = {static_cast<double>(i + 1),
                                       static_cast<double>(r.detection.n0 + 1),
                                       static_cast<double>(r.detection.m),
                                       r.detection.score,
                                       1.0,
                                       e.n0.mean + off, e.n0.lo + off, e.n0.hi + off,
                                       e.m.mean, e.m.lo, e.m.hi,
                                       e.sigma_d2.mean, e.sigma_d2.lo, e.sigma_d2.hi};
            if (shape)
                for (int p = 0; p < 6; ++p)
                    row.insert(row.end(),
                               {(*e.shape)[p].mean, (*e.shape)[p].lo, (*e.shape)[p].hi});
            row.insert(row.end(), {r.loc_rate_all, r.loc_rate_post});
            if (shape)
                for (int p = 0; p < kShapeParamCount; ++p) row.push_back(r.shape_rate_post[p]);
            row.insert(row.end(), {snr_before, snr_after, r.wall_ms});
            w.row(row);
        }
        if (any_failed && strict) throw NumericError("one or more pulses failed (--strict)");
    });
    return 0;
}

int run_synth(const std::string& clean_path, const std::string& spec_path,
              const std::string& output, const std::string& truth_path, uint64_t seed) {
    const Signal clean = read_wav(clean_path);
    log_kv("input", clean_path);
    log_kv("spec", spec_path);
    log_kv("output", output);
    log_kv("seed", std::to_string(seed));

    InjectionSpec spec;
    spec.seed = seed;
    const CsvTable t = read_csv(spec_path);
    const char* required[] = {"n0", "M", "sigma_d2", "V_t", "tau_m",
                              "tau_f", "f_max", "f_min", "phi", "tail_len"};
    std::vector<int> idx;
    for (const char* name : required) {
        const int i = t.column_index(name);
        if (i < 0) throw FormatError(spec_path + ": missing column " + name);
        idx.push_back(i);
    }
    for (const auto& row : t.rows) {
        PulseSpec p;
        const double n0_file = row[idx[0]];
        if (n0_file < 1) throw SpecError("spec n0 is 1-based and must be >= 1");
        p.n0 = static_cast<std::size_t>(n0_file) - 1;
        p.m = static_cast<int>(row[idx[1]]);
        p.sigma_d2 = row[idx[2]];
        p.tail.v_t = row[idx[3]];
        p.tail.tau_m = row[idx[4]];
        p.tail.tau_f = row[idx[5]];
        p.tail.f_max = row[idx[6]];
        p.tail.f_min = row[idx[7]];
        p.tail.phi = row[idx[8]];
        p.tail_len = static_cast<int>(row[idx[9]]);
        spec.pulses.push_back(p);
    }

    const Signal degraded = inject_pulse(clean, spec);

    std::size_t clipped = 0;
    const double hi = 1.0 - std::pow(2.0, -15);
    for (double v : degraded.samples)
        if (v < -1.0 || v > hi) ++clipped;
    if (clipped > 0)
        std::fprintf(stderr,
                     "warning: %zu samples exceed the 16-bit range and will clip on write\n",
                     clipped);

    write_wav(output, degraded);

    CsvWriter w(truth_path, seed,
                {"n0", "M", "sigma_d2", "V_t", "tau_m", "tau_f", "f_max", "f_min", "phi",
                 "tail_len"});
    for (const PulseSpec& p : spec.pulses)
        w.row({static_cast<double>(p.n0 + 1), static_cast<double>(p.m), p.sigma_d2, p.tail.v_t,
               p.tail.tau_m, p.tail.tau_f, p.tail.f_max, p.tail.f_min, p.tail.phi,
               static_cast<double>(p.tail_len)});
    std::printf("injected %zu pulse(s)\n", spec.pulses.size());
    return 0;
}

int run_chain_stats(const std::string& chain_path, int burnin, int thin,
                    const std::string& out_path) {
    const CsvTable t = read_csv(chain_path);
    if (t.rows.empty()) throw FormatError(chain_path + ": no data rows");
    if (thin < 1 || burnin < 0 || burnin >= static_cast<int>(t.rows.size()))
        throw ConfigError("chain-stats: burn-in/thin leave no retained rows");

    std::vector<std::size_t> keep;
    for (std::size_t k = static_cast<std::size_t>(burnin); k < t.rows.size();
         k += static_cast<std::size_t>(thin))
        keep.push_back(k);

    std::printf("%-12s %12s %26s %12s\n", "parameter", "mean", "interval95", "accept");
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        const std::string& name = t.columns[c];
        if (name == "iteration") continue;
        std::vector<double> vals;
        vals.reserve(keep.size());
        for (std::size_t k : keep) vals.push_back(t.rows[k][c]);
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        if (name.rfind("acc_", 0) == 0 || name == "loc_accepted") {
            std::printf("%-12s %12s %26s %12.4f\n", name.c_str(), "-", "-", mean);
            continue;
        }
        const double lo = empirical_quantile(vals, 0.025);
        const double hi = empirical_quantile(vals, 0.975);
        std::printf("%-12s %12.6g %26s %12s\n", name.c_str(), mean,
                    interval(lo, hi).c_str(), "-");
    }

    if (!out_path.empty()) {
        CsvWriter w(out_path, 0, t.columns);
        for (std::size_t k : keep) w.row(t.rows[k]);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"depulse: Bayesian removal of long low-frequency pulses from mono WAV audio"};
    app.set_version_flag("--version", depulse::kVersion);
    app.set_config("--config", "", "Read options from a key=value file with [sections]");
    app.allow_config_extras(CLI::config_extras_mode::error);  // unknown keys are rejected
    app.require_subcommand(1);

    // detect
    auto* detect = app.add_subcommand("detect", "Locate pulse onsets and print n0, M, score");
    static std::string det_input, dump_mu;
    static uint64_t det_seed = 0;
    static DetectorFlags det_flags;
    detect->add_option("input", det_input, "Degraded WAV file")->required();
    detect->add_option("--dump-mu", dump_mu, "Write b, mu, mu_m, delta_mu as CSV");
    detect->add_option("--seed", det_seed, "Seed recorded in CSV headers")->capture_default_str();
    det_flags.attach(detect);
    detect->callback([&] { run_detect(det_input, det_flags, dump_mu, det_seed); });

    // restore
    auto* restore = app.add_subcommand("restore", "Detect, estimate, and subtract pulses");
    run_restore(restore);

    // synth
    auto* synth = app.add_subcommand("synth", "Inject synthetic pulses from a spec CSV");
    static std::string sy_clean, sy_spec, sy_out, sy_truth;
    static uint64_t sy_seed = 0;
    synth->add_option("input", sy_clean, "Clean WAV file")->required();
    synth->add_option("spec", sy_spec, "Pulse spec CSV (n0 is 1-based)")->required();
    synth->add_option("-o,--out", sy_out, "Degraded WAV output")->required();
    synth->add_option("--truth", sy_truth, "Ground-truth CSV (default: <out>.truth.csv)");
    synth->add_option("--seed", sy_seed, "Injection seed")->capture_default_str();
    synth->callback([&] {
        if (sy_truth.empty()) sy_truth = sy_out + ".truth.csv";
        run_synth(sy_clean, sy_spec, sy_out, sy_truth, sy_seed);
    });

    // chain-stats
    auto* stats = app.add_subcommand("chain-stats", "Summarize a chain CSV from --dump-chain");
    static std::string cs_input, cs_out;
    static int cs_burnin = 0, cs_thin = 1;
    stats->add_option("input", cs_input, "Chain CSV")->required();
    stats->add_option("--burnin", cs_burnin, "Rows to discard")->capture_default_str();
    stats->add_option("--thin", cs_thin, "Keep one row in this many")->capture_default_str();
    stats->add_option("--out", cs_out, "Write the retained rows as CSV");
    stats->callback([&] { run_chain_stats(cs_input, cs_burnin, cs_thin, cs_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const depulse::NoPulseEvidenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNoPulse;
    } catch (const depulse::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const depulse::DegenerateSignalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const depulse::DegenerateFitError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const depulse::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return 0;
}
