#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "eegaze/dataset.hpp"
#include "eegaze/error.hpp"
#include "eegaze/model.hpp"
#include "eegaze/optim.hpp"
#include "eegaze/tensor.hpp"

namespace eegaze {

// "MAE" is read as the mean euclidean distance between predicted and true
// gaze points (the paper quotes distance errors in mm); per-axis MAE (mean
// absolute coordinate error) stays available as an option.
enum class MaeKind { euclidean, per_axis };

inline MaeKind mae_kind_from(const std::string& s) {
    if (s == "euclidean") return MaeKind::euclidean;
    if (s == "per-axis") return MaeKind::per_axis;
    throw std::invalid_argument("unknown MAE kind '" + s + "'");
}

inline double mae(const Tensor<float>& pred, const Tensor<float>& target,
                  MaeKind kind = MaeKind::euclidean) {
    if (pred.shape() != target.shape() || pred.shape().rank() != 2 || pred.shape()[1] != 2)
        throw std::invalid_argument("mae: expected matching [N,2] tensors");
    const std::size_t n = pred.shape()[0];
    if (n == 0) throw std::invalid_argument("mae: empty prediction");
    double acc = 0.0;
    if (kind == MaeKind::euclidean) {
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = static_cast<double>(pred[2 * i]) - target[2 * i];
            const double dy = static_cast<double>(pred[2 * i + 1]) - target[2 * i + 1];
            acc += std::sqrt(dx * dx + dy * dy);
        }
        return acc / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < 2 * n; ++i)
        acc += std::abs(static_cast<double>(pred[i]) - target[i]);
    return acc / static_cast<double>(2 * n);
}

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    AdamConfig<float> adam;
    SplitSpec split;
    std::uint64_t seed = 1;
    ModelConfig variant;
    std::string variant_name = "base";

    void validate() const {
        if (epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");
        if (batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
        adam.validate();
        split.validate();
        variant.validate();
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_mae = 0.0;
    double seconds = 0.0;
};

struct RunReport {
    std::string variant;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    double test_mae = 0.0;
    std::size_t param_count = 0;
    std::size_t best_val_epoch = 0; // recorded, never used for headline numbers
    std::size_t optimizer_steps = 0;
    double total_seconds = 0.0;
};

struct BenchReport {
    std::string mode;
    std::size_t warmup_passes = 0;
    std::size_t samples = 0;
    std::size_t forward_calls = 0;
    double total_seconds = 0.0;
    double seconds_per_1000 = 0.0;
};

enum class BenchMode { batch1_1000, batch64_testset };

// Infer-mode MAE over the given indices; never mutates the model.
inline double evaluate(Model<float>& model, const EegDataset& ds,
                       const std::vector<std::size_t>& indices,
                       MaeKind kind = MaeKind::euclidean, std::size_t batch_size = 64) {
    if (indices.empty()) throw std::invalid_argument("evaluate: no indices");
    if (ds.channels() != model.config().channels || ds.timesteps() != model.config().timesteps)
        throw std::invalid_argument("evaluate: dataset shape does not match model config");
    double acc = 0.0;
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t end = std::min(indices.size(), start + batch_size);
        std::vector<std::size_t> chunk(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                       indices.begin() + static_cast<std::ptrdiff_t>(end));
        auto [x, y] = ds.gather(chunk);
        Tensor<float> pred = model.forward(x, Mode::infer);
        acc += mae(pred, y, kind) * static_cast<double>(chunk.size());
    }
    return acc / static_cast<double>(indices.size());
}

// One training run: epochs x batches of forward(train) / mse / backward /
// adam step, validation MAE per epoch in infer mode, test MAE exactly once
// at the end. Fully deterministic given the config (single worker, fixed
// evaluation order); wall-clock fields are the only nondeterministic ones.
inline std::pair<Model<float>, RunReport> train(const EegDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.channels() != cfg.variant.channels || ds.timesteps() != cfg.variant.timesteps)
        throw std::invalid_argument("train: dataset shape does not match model config");

    using clock = std::chrono::steady_clock;
    const auto run_start = clock::now();

    Model<float> model(cfg.variant, cfg.seed);
    Adam<float> opt(cfg.adam);
    auto params = model.params();

    RunReport report;
    report.variant = cfg.variant_name;
    report.seed = cfg.seed;
    report.param_count = model.param_count();

    const std::uint64_t batch_seed = mix64(cfg.seed, 0xB47C4E55ull);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto epoch_start = clock::now();
        const SplitIndices idx = split(ds.n(), cfg.split, epoch);
        const auto batch_list = batches(idx.train, cfg.batch_size, batch_seed, epoch);

        double loss_acc = 0.0;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < batch_list.size(); ++bi) {
            auto [x, y] = ds.gather(batch_list[bi]);
            Tensor<float> pred = model.forward(x, Mode::train);
            auto [loss, grad] = mse_loss(pred, y);
            if (!std::isfinite(static_cast<double>(loss)))
                throw DivergenceError(epoch, bi,
                                      "non-finite loss at epoch " + std::to_string(epoch) +
                                          ", batch " + std::to_string(bi));
            loss_acc += static_cast<double>(loss) * static_cast<double>(batch_list[bi].size());
            seen += batch_list[bi].size();
            model.backward(grad);
            opt.step(params);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_acc / static_cast<double>(seen);
        rec.val_mae = evaluate(model, ds, idx.val, MaeKind::euclidean, cfg.batch_size);
        rec.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
        report.epochs.push_back(rec);
    }

    const SplitIndices final_idx = split(ds.n(), cfg.split, 1);
    report.test_mae = evaluate(model, ds, final_idx.test, MaeKind::euclidean, cfg.batch_size);
    report.optimizer_steps = opt.step_count();

    report.best_val_epoch = 1;
    for (const auto& e : report.epochs)
        if (e.val_mae < report.epochs[report.best_val_epoch - 1].val_mae)
            report.best_val_epoch = e.epoch;

    report.total_seconds = std::chrono::duration<double>(clock::now() - run_start).count();
    return {std::move(model), std::move(report)};
}

struct MultiRunResult {
    double mean_mae = 0.0;
    double std_mae = 0.0; // sample standard deviation (n-1 denominator)
    std::vector<RunReport> runs;
    std::vector<Model<float>> models;
};

// The five-runs protocol: independent trainings with seeds seed+0 ..
// seed+runs-1 over the same split.
inline MultiRunResult multi_run(const EegDataset& ds, const TrainConfig& cfg, std::size_t runs) {
    if (runs < 2) throw std::invalid_argument("multi_run: needs runs >= 2");
    MultiRunResult result;
    for (std::size_t r = 0; r < runs; ++r) {
        TrainConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + r;
        try {
            auto [model, report] = train(ds, run_cfg);
            result.models.push_back(std::move(model));
            result.runs.push_back(std::move(report));
        } catch (const std::exception& e) {
            throw Error("run " + std::to_string(r) + " failed: " + e.what());
        }
    }
    double acc = 0.0;
    for (const auto& r : result.runs) acc += r.test_mae;
    result.mean_mae = acc / static_cast<double>(runs);
    double ss = 0.0;
    for (const auto& r : result.runs) {
        const double d = r.test_mae - result.mean_mae;
        ss += d * d;
    }
    result.std_mae = std::sqrt(ss / static_cast<double>(runs - 1));
    return result;
}

// Inference throughput. Only the forward calls are timed (monotonic clock);
// batch materialization and warmup passes stay outside the timed region.
inline BenchReport bench(Model<float>& model, const EegDataset& ds, BenchMode mode,
                         std::size_t warmup_passes = 10) {
    using clock = std::chrono::steady_clock;
    BenchReport report;
    report.warmup_passes = warmup_passes;

    if (mode == BenchMode::batch1_1000) {
        if (ds.n() < 1000)
            throw std::invalid_argument("bench batch1-1000 needs >= 1000 samples, have " +
                                        std::to_string(ds.n()));
        report.mode = "batch1-1000";
        auto [wx, wy] = ds.gather({0});
        for (std::size_t i = 0; i < warmup_passes; ++i) model.forward(wx, Mode::infer);
        double total = 0.0;
        for (std::size_t i = 0; i < 1000; ++i) {
            auto [x, y] = ds.gather({i});
            const auto t0 = clock::now();
            model.forward(x, Mode::infer);
            total += std::chrono::duration<double>(clock::now() - t0).count();
        }
        report.samples = 1000;
        report.forward_calls = 1000;
        report.total_seconds = total;
    } else {
        report.mode = "batch64-testset";
        std::vector<std::size_t> all(ds.n());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        auto [wx, wy] = ds.gather(std::vector<std::size_t>(
            all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(64, all.size()))));
        for (std::size_t i = 0; i < warmup_passes; ++i) model.forward(wx, Mode::infer);
        double total = 0.0;
        std::size_t calls = 0;
        for (std::size_t start = 0; start < all.size(); start += 64) {
            const std::size_t end = std::min(all.size(), start + 64);
            auto [x, y] = ds.gather(std::vector<std::size_t>(
                all.begin() + static_cast<std::ptrdiff_t>(start),
                all.begin() + static_cast<std::ptrdiff_t>(end)));
            const auto t0 = clock::now();
            model.forward(x, Mode::infer);
            total += std::chrono::duration<double>(clock::now() - t0).count();
            ++calls;
        }
        report.samples = ds.n();
        report.forward_calls = calls;
        report.total_seconds = total;
    }

    report.seconds_per_1000 = report.total_seconds / (static_cast<double>(report.samples) / 1000.0);
    return report;
}

// Line-delimited structured records (one self-describing JSON object per
// line) plus a single CSV summary row for table assembly.

inline void write_report_jsonl(std::ostream& out, const RunReport& report, std::size_t run_index) {
    for (const auto& e : report.epochs) {
        nlohmann::json rec{{"record", "epoch"},     {"run", run_index},
                           {"epoch", e.epoch},      {"train_loss", e.train_loss},
                           {"val_mae", e.val_mae},  {"seconds", e.seconds}};
        out << rec.dump() << '\n';
    }
    nlohmann::json summary{{"record", "run_summary"},
                           {"run", run_index},
                           {"variant", report.variant},
                           {"seed", report.seed},
                           {"test_mae", report.test_mae},
                           {"param_count", report.param_count},
                           {"best_val_epoch", report.best_val_epoch},
                           {"optimizer_steps", report.optimizer_steps},
                           {"total_seconds", report.total_seconds}};
    out << summary.dump() << '\n';
}

inline void write_aggregate_jsonl(std::ostream& out, std::size_t runs, double mean_mae,
                                  double std_mae) {
    nlohmann::json rec{
        {"record", "aggregate"}, {"runs", runs}, {"mean_mae", mean_mae}, {"std_mae", std_mae}};
    out << rec.dump() << '\n';
}

inline void write_bench_jsonl(std::ostream& out, const BenchReport& r) {
    nlohmann::json rec{{"record", "bench"},
                       {"mode", r.mode},
                       {"warmup_passes", r.warmup_passes},
                       {"samples", r.samples},
                       {"forward_calls", r.forward_calls},
                       {"total_seconds", r.total_seconds},
                       {"seconds_per_1000", r.seconds_per_1000}};
    out << rec.dump() << '\n';
}

inline const char* kSummaryCsvHeader = "variant,seeds,mean_mae,std_mae,params,bench_seconds";

inline std::string summary_csv_row(const std::string& variant,
                                   const std::vector<std::uint64_t>& seeds, double mean_mae,
                                   double std_mae, std::size_t params, double bench_seconds) {
    std::string seed_list;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (i) seed_list += '+';
        seed_list += std::to_string(seeds[i]);
    }
    nlohmann::json num; // reuse the shortest round-trip float formatting
    auto fmt = [&](double v) {
        num = v;
        return num.dump();
    };
    std::string row = variant + "," + seed_list + "," + fmt(mean_mae) + "," + fmt(std_mae) + "," +
                      std::to_string(params) + ",";
    if (bench_seconds >= 0.0) row += fmt(bench_seconds);
    return row;
}

} // namespace eegaze
