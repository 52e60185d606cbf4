// Acceptance gate. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero if any executed criterion fails.
//
//   acceptance [--core] [--data] [--full] [--data-dir DIR]
//
// --core runs the self-contained criteria (1-5, 9); --data runs the ones that
// need the six TUDataset directories (6-8), looked up under --data-dir or
// $AMOSL_DATA_DIR. Without lane flags both lanes run. --full switches
// criterion 7 to the full profile (200 epochs, 10 folds, floor 0.85) instead
// of the reduced CI profile (50 epochs, 3 folds, floor 0.80).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "amosl/audit.hpp"
#include "amosl/checkpoint.hpp"
#include "amosl/config.hpp"
#include "amosl/dataset.hpp"
#include "amosl/errors.hpp"
#include "amosl/matrix.hpp"
#include "amosl/metrics.hpp"
#include "amosl/rng.hpp"
#include "amosl/trainer.hpp"
#include "amosl/transport.hpp"
#include "toy_data.hpp"

namespace fs = std::filesystem;
using namespace amosl;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << detail << "\n";
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 3) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

// --- criterion 1: LP oracle equivalence -------------------------------------

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    const OracleResult r = run_ot_oracle(500, 2024);
    const double secs = seconds_since(t0);
    const bool pass = r.passed() && secs < 10.0;
    report(1, pass,
           "LP oracle, " + std::to_string(r.trials) + " instances, " +
               std::to_string(r.mismatches) + " mismatches, max gap " + fmt(r.max_gap, 2) +
               ", " + fmt(secs, 2) + "s");
}

// --- criterion 2: duality & feasibility -------------------------------------

void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(777);
    const double tol = 1e-9;
    double max_gap = 0.0, max_violation = 0.0;
    std::size_t bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n1 = 1 + uniform_index(rng, 20);
        const std::size_t n2 = 1 + uniform_index(rng, 20);
        Matrix cost(n1, n2);
        for (std::size_t k = 0; k < cost.size(); ++k) cost.raw()[k] = uniform(rng, 0.0, 2.0);
        std::vector<double> w1(n1), w2(n2);
        for (double& w : w1) w = uniform(rng, 0.05, 4.0);
        for (double& w : w2) w = uniform(rng, 0.05, 4.0);

        const TransportPlan plan = solve_transport(cost, w1, w2);

        double violation = 0.0;
        double total = 0.0, mass1 = 0.0, mass2 = 0.0;
        for (std::size_t i = 0; i < n1; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n2; ++j) {
                violation = std::max(violation, -plan.flows(i, j));
                row += plan.flows(i, j);
            }
            violation = std::max(violation, row - w1[i]);
            total += row;
            mass1 += w1[i];
        }
        for (std::size_t j = 0; j < n2; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < n1; ++i) col += plan.flows(i, j);
            violation = std::max(violation, col - w2[j]);
            mass2 += w2[j];
        }
        violation = std::max(violation, std::abs(total - std::min(mass1, mass2)));
        const double gap = std::abs(plan.value - plan.dual_value(w1, w2));

        max_gap = std::max(max_gap, gap);
        max_violation = std::max(max_violation, violation);
        if (gap > tol || violation > tol) ++bad;
    }
    const double secs = seconds_since(t0);
    const bool pass = bad == 0 && secs < 30.0;
    report(2, pass,
           "duality & feasibility, 1000 instances (n <= 20), " + std::to_string(bad) +
               " violations, max gap " + fmt(max_gap, 2) + ", max constraint slack breach " +
               fmt(max_violation, 2) + ", " + fmt(secs, 2) + "s");
}

// --- criterion 3: gradient audit ---------------------------------------------

void criterion_3() {
    const auto t0 = std::chrono::steady_clock::now();
    const AuditSuite suite = run_gradient_audit();
    const double secs = seconds_since(t0);
    double worst = 0.0;
    for (const AuditCase& c : suite.cases) worst = std::max(worst, c.max_rel_err / c.tol);
    const bool pass = suite.all_passed() && secs < 120.0;
    if (!pass) print_suite(suite, std::cerr);
    report(3, pass,
           "gradient audit, " + std::to_string(suite.cases.size()) +
               " cases (primitives 1e-6, transport 1e-4, network 1e-3), worst rel/tol " +
               fmt(worst, 2) + ", " + fmt(secs, 2) + "s");
}

// --- criterion 4: Algorithm 1 properties --------------------------------------

void criterion_4() {
    bool pass = true;
    std::string detail;

    RegState hand;
    update_reg(hand, 0.8);
    if (std::abs(hand.reg - 0.2) >= 1e-15) {
        pass = false;
        detail = "hand check reg(0.8 at t=0) gave " + fmt(hand.reg, 17);
    }
    update_reg(hand, 0.5);
    if (pass && std::abs(hand.reg - 0.23) >= 1e-15) {
        pass = false;
        detail = "worked example gave " + fmt(hand.reg, 17);
    }

    std::mt19937_64 rng(31);
    std::size_t updates = 0;
    for (int seq = 0; pass && seq < 10000; ++seq) {
        RegState s;
        const std::size_t len = 1 + uniform_index(rng, 50);
        for (std::size_t t = 0; t < len; ++t) {
            update_reg(s, uniform01(rng));
            ++updates;
            if (s.reg < 0.0 || s.reg > 1.0) {
                pass = false;
                detail = "reg left [0,1]: " + fmt(s.reg, 17);
                break;
            }
        }
    }
    if (pass)
        detail = "reg in [0,1] across 10000 sequences (" + std::to_string(updates) +
                 " updates), hand checks 0.2 / 0.23 exact";
    report(4, pass, detail);
}

// --- criterion 5: Eq. 7/8 conservation ----------------------------------------

void criterion_5() {
    std::mt19937_64 rng(55);
    bool pass = true;
    std::string detail;
    for (int done = 0; pass && done < 1000; ++done) {
        const std::size_t n = 1 + uniform_index(rng, 6);
        const std::size_t d = 1 + uniform_index(rng, 8);
        Matrix z1(n, d), z2(n, d);
        bool tie = true;
        while (tie) {
            tie = false;
            for (std::size_t k = 0; k < z1.size(); ++k) {
                z1.raw()[k] = uniform(rng, -1.0, 1.0);
                z2.raw()[k] = uniform(rng, -1.0, 1.0);
                if (z1.raw()[k] == z2.raw()[k]) tie = true;
            }
        }
        const ContributionScores mx = contribution_scores(z1, z2, FusionKind::Max);
        for (std::size_t r = 0; pass && r < n; ++r) {
            if (mx.cs1[r] + mx.cs2[r] != static_cast<double>(d)) {
                pass = false;
                detail = "max fusion row " + std::to_string(r) + ": CS1+CS2 = " +
                         fmt(mx.cs1[r] + mx.cs2[r], 17) + " != d = " + std::to_string(d);
            }
        }
        for (const FusionKind fk : {FusionKind::Concat, FusionKind::Hadamard}) {
            const ContributionScores cs = contribution_scores(z1, z2, fk);
            for (std::size_t r = 0; pass && r < n; ++r) {
                if (cs.cs_hat1[r] != 0.5 || cs.cs_hat2[r] != 0.5) {
                    pass = false;
                    detail = to_string(fk) + " fusion: CS-hat != 0.5";
                }
            }
        }
    }
    if (pass) detail = "CS1+CS2 = d (max) and CS-hat = 0.5 (concat/hadamard) on 1000 no-tie pairs";
    report(5, pass, detail);
}

// --- criteria 6-8: dataset-gated ----------------------------------------------

struct Table1Row {
    const char* name;
    std::size_t graphs, classes, dim;
    double mean_vertices;
};

constexpr Table1Row kTable1[] = {
    {"MUTAG", 188, 2, 7, 17.93},   {"BZR_MD", 306, 2, 8, 21.30},
    {"PTC_MR", 344, 2, 18, 14.29}, {"ER_MD", 446, 2, 10, 21.33},
    {"Cuneiform", 267, 30, 3, 21.27}, {"KKI", 83, 2, 190, 26.96},
};

bool dataset_present(const std::string& dir, const std::string& name) {
    return fs::exists(fs::path(dir) / (name + "_A.txt")) ||
           fs::exists(fs::path(dir) / name / (name + "_A.txt"));
}

std::string missing_data_note(const std::string& dir) {
    if (dir.empty())
        return "no dataset directory (pass --data-dir DIR or set AMOSL_DATA_DIR); "
               "needs the TUDataset folders MUTAG, BZR_MD, PTC_MR, ER_MD, Cuneiform, KKI";
    std::string missing;
    for (const Table1Row& row : kTable1)
        if (!dataset_present(dir, row.name)) missing += std::string(missing.empty() ? "" : ", ") + row.name;
    return "dataset directory '" + dir + "' is missing: " + missing;
}

void criterion_6(const std::string& dir) {
    bool pass = true;
    std::string detail;
    for (const Table1Row& row : kTable1) {
        try {
            const RawDataset raw = parse_tudataset(dir, row.name);
            const std::vector<Matrix> feats = build_features(raw);
            const std::size_t dim = feats.empty() ? 0 : feats[0].cols();
            const double mean = std::round(raw.mean_vertices() * 100.0) / 100.0;
            if (raw.graph_count != row.graphs || raw.class_count() != row.classes ||
                dim != row.dim || std::abs(mean - row.mean_vertices) > 5e-3) {
                pass = false;
                detail = std::string(row.name) + " parsed as (" + std::to_string(raw.graph_count) +
                         ", " + std::to_string(raw.class_count()) + ", " + std::to_string(dim) +
                         ", " + fmt(mean, 4) + "), expected (" + std::to_string(row.graphs) + ", " +
                         std::to_string(row.classes) + ", " + std::to_string(row.dim) + ", " +
                         fmt(row.mean_vertices, 4) + ")";
                break;
            }
        } catch (const std::exception& e) {
            pass = false;
            detail = std::string(row.name) + ": " + e.what();
            break;
        }
    }
    if (pass) detail = "all six datasets match (graphs, classes, feature dim, mean vertices)";
    report(6, pass, "dataset fidelity — " + detail);
}

TrainConfig mutag_config(bool full) {
    TrainConfig cfg;
    cfg.dataset = "MUTAG";
    cfg.conv = ConvKind::ChebNet;
    cfg.cheb_k = 6;
    cfg.fusion = FusionKind::Max;
    cfg.reg_mode = RegMode::Adaptive;
    cfg.epochs = full ? 200 : 50;
    return cfg;
}

void criterion_7(const std::string& dir, bool full) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const RawDataset raw = parse_tudataset(dir, "MUTAG");
        const PreparedDataset ds = prepare_dataset(raw, 1);
        const TrainConfig cfg = mutag_config(full);
        const std::size_t folds = full ? 10 : 3;
        const double floor = full ? 0.85 : 0.80;
        const Report rep = cross_validate(ds, cfg, folds);
        const double secs = seconds_since(t0);
        const bool pass = rep.mean_accuracy >= floor;
        report(7, pass,
               std::string(full ? "full" : "reduced") + " profile, MUTAG " +
                   std::to_string(folds) + "-fold mean accuracy " + fmt(rep.mean_accuracy, 4) +
                   " +/- " + fmt(rep.std_accuracy, 3) + " vs floor " + fmt(floor, 3) + ", " +
                   fmt(secs, 3) + "s");
    } catch (const std::exception& e) {
        report(7, false, std::string("quantitative floor — ") + e.what());
    }
}

void criterion_8(const std::string& dir) {
    try {
        const RawDataset raw = parse_tudataset(dir, "MUTAG");
        const PreparedDataset ds = prepare_dataset(raw, 1);
        TrainConfig cfg = mutag_config(false);

        TrainConfig fixed = cfg;
        fixed.reg_mode = RegMode::FixedOne;
        const Report rep_fixed = cross_validate(ds, fixed, 3);
        const Report rep_adaptive = cross_validate(ds, cfg, 3);
        const bool distance_dir = rep_adaptive.mean_final_train_ot > rep_fixed.mean_final_train_ot;

        TrainConfig off = cfg;
        off.reg_mode = RegMode::Off;
        const Report rep_off = cross_validate(ds, off, 3);
        const bool non_degrading = rep_adaptive.mean_accuracy >= rep_off.mean_accuracy - 0.01;

        report(8, distance_dir && non_degrading,
               "ablations — final mean OT adaptive " + fmt(rep_adaptive.mean_final_train_ot, 4) +
                   " vs fixed-one " + fmt(rep_fixed.mean_final_train_ot, 4) +
                   (distance_dir ? " (greater)" : " (NOT greater)") + "; accuracy with " +
                   fmt(rep_adaptive.mean_accuracy, 4) + " vs without " +
                   fmt(rep_off.mean_accuracy, 4) +
                   (non_degrading ? " (within 1pp)" : " (degraded past 1pp)"));
    } catch (const std::exception& e) {
        report(8, false, std::string("ablations — ") + e.what());
    }
}

// --- criterion 9: determinism ---------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void criterion_9() {
    const fs::path root = fs::temp_directory_path() / "amosl_acceptance_c9";
    fs::remove_all(root);
    fs::create_directories(root);

    const PreparedDataset ds = toy_dataset(6);
    TrainConfig cfg;
    cfg.dataset = "toy";
    cfg.cheb_k = 2;
    cfg.epochs = 3;
    cfg.batch = 4;
    cfg.seed = 11;

    const auto run = [&](const std::string& tag) {
        const fs::path metrics = root / (tag + ".ndjson");
        MetricsWriter writer(metrics.string());
        TrainHooks hooks;
        hooks.metrics = &writer;
        hooks.run_id = "fixedrun";
        std::vector<FoldResult> folds;
        cross_validate(ds, cfg, 2, hooks, &folds);
        std::vector<fs::path> ckpts;
        for (const FoldResult& f : folds) {
            const fs::path p = root / (tag + "_fold" + std::to_string(f.fold) + ".ckpt");
            save_checkpoint(f.params, p.string());
            ckpts.push_back(p);
        }
        return std::make_pair(metrics, ckpts);
    };

    const auto [metrics_a, ckpts_a] = run("a");
    const auto [metrics_b, ckpts_b] = run("b");

    bool pass = slurp(metrics_a) == slurp(metrics_b) && !slurp(metrics_a).empty();
    for (std::size_t k = 0; pass && k < ckpts_a.size(); ++k)
        pass = slurp(ckpts_a[k]) == slurp(ckpts_b[k]) && !slurp(ckpts_a[k]).empty();
    report(9, pass,
           pass ? "repeated run: metrics stream and checkpoints byte-identical"
                : "repeated run produced differing bytes under " + root.string());
    fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
    bool core = false, data = false, full = false;
    std::string data_dir;
    if (const char* env = std::getenv("AMOSL_DATA_DIR")) data_dir = env;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--core") core = true;
        else if (arg == "--data") data = true;
        else if (arg == "--full") full = true;
        else if (arg == "--data-dir" && i + 1 < argc) data_dir = argv[++i];
        else {
            std::cerr << "usage: acceptance [--core] [--data] [--full] [--data-dir DIR]\n";
            return 2;
        }
    }
    if (!core && !data) core = data = true;

    if (core) {
        criterion_1();
        criterion_2();
        criterion_3();
        criterion_4();
        criterion_5();
    }
    if (data) {
        bool ready = !data_dir.empty();
        if (ready)
            for (const Table1Row& row : kTable1) ready = ready && dataset_present(data_dir, row.name);
        if (ready) {
            criterion_6(data_dir);
            criterion_7(data_dir, full);
            criterion_8(data_dir);
        } else {
            const std::string note = missing_data_note(data_dir);
            report(6, false, "dataset fidelity — " + note);
            report(7, false, "quantitative floor — " + note);
            report(8, false, "ablations — " + note);
        }
    }
    if (core) criterion_9();

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all executed criteria passed\n";
    return 0;
}
