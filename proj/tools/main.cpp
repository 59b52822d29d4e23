#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "surfblc/errors.hpp"
#include "surfblc/pipeline.hpp"
#include "surfblc/png_io.hpp"
#include "surfblc/synth.hpp"

namespace fs = std::filesystem;
using namespace surfblc;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write: " + path.string());
    os << text;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory: " + dir.string());
}

PipelineConfig load_config(const std::optional<std::string>& config_path,
                           const std::optional<std::uint64_t>& seed) {
    PipelineConfig c =
        config_path ? PipelineConfig::from_json_text(slurp(*config_path)) : PipelineConfig::defaults();
    if (seed) {
        // --seed overrides every seed in the config, deterministically
        c.seed = *seed;
        c.stage1.seed = *seed + 1;
        c.stage2.seed = *seed + 2;
    }
    return c;
}

void write_eval_artifacts(const fs::path& out, const std::string& prefix,
                          const EvalReport& report) {
    write_samples_csv(out / (prefix + "_samples.csv"), report);
    write_quartile_scatter_csv(out / (prefix + "_quartiles.csv"), report);
    write_quartile_scatter_svg(out / (prefix + "_quartiles.svg"), report);
    write_hours_csv(out / (prefix + "_hours.csv"), report);
    write_hours_boxplot_svg(out / (prefix + "_hours.svg"), report);
}

nlohmann::json triple_json(const ParamTriple& t) {
    return {{"sk_um", t.sk}, {"vvv_ml_m2", t.vvv}, {"vmp_ml_m2", t.vmp}};
}

int run(int argc, char** argv) {
    CLI::App app{"surfblc: bearing load curve prediction from reflection images"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "seed overriding all configured seeds");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_out;
    std::size_t synth_count = 200, synth_liners = 25, synth_k = 512;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--count", synth_count, "number of image/depth pairs");
    synth_cmd->add_option("--liners", synth_liners, "number of liner groups");
    synth_cmd->add_option("--k", synth_k, "BLC sampling resolution");

    // blc
    auto* blc_cmd = app.add_subcommand("blc", "compute the BLC of a depth profile");
    std::string blc_in, blc_out;
    std::size_t blc_k = 512;
    blc_cmd->add_option("input", blc_in, "depth profile (.htdp)")->required()->check(CLI::ExistingFile);
    blc_cmd->add_option("--k", blc_k, "BLC sampling resolution");
    blc_cmd->add_option("--out", blc_out, "output BLC text file (default: stdout)");

    // params
    auto* params_cmd = app.add_subcommand("params", "roughness parameters of a BLC");
    std::string params_in, params_out, params_search = "full";
    params_cmd->add_option("input", params_in, "BLC text file")->required()->check(CLI::ExistingFile);
    params_cmd->add_option("--search", params_search, "core window search: full | core")
        ->check(CLI::IsMember({"full", "core"}));
    params_cmd->add_option("--out", params_out, "output JSON file (default: stdout)");

    // preprocess
    auto* prep_cmd = app.add_subcommand("preprocess", "image -> filtered BLC stack and features");
    std::string prep_in, prep_out;
    std::size_t prep_k = 512, prep_rows = 512, prep_cols = 512;
    prep_cmd->add_option("input", prep_in, "RGB reflection image (PNG)")->required()->check(CLI::ExistingFile);
    prep_cmd->add_option("--k", prep_k, "BLC sampling resolution");
    prep_cmd->add_option("--rows", prep_rows, "resize target rows");
    prep_cmd->add_option("--cols", prep_cols, "resize target cols");
    prep_cmd->add_option("--out", prep_out, "output JSON file (default: stdout)");

    // train
    auto* train_cmd = app.add_subcommand("train", "train both stages on a manifest");
    std::string train_manifest, train_out;
    train_cmd->add_option("--manifest", train_manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_out, "output directory")->required();

    // crossval
    auto* cv_cmd = app.add_subcommand("crossval", "grouped k-fold cross-validation");
    std::string cv_manifest, cv_out;
    cv_cmd->add_option("--manifest", cv_manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
    cv_cmd->add_option("--out", cv_out, "output directory")->required();

    // predict
    auto* pred_cmd = app.add_subcommand("predict", "predict the BLC of one image");
    std::string pred_model, pred_in, pred_out;
    pred_cmd->add_option("--model", pred_model, "trained model bundle")->required()->check(CLI::ExistingFile);
    pred_cmd->add_option("input", pred_in, "RGB reflection image (PNG)")->required()->check(CLI::ExistingFile);
    pred_cmd->add_option("--out", pred_out, "output BLC text file")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a bundle against a manifest");
    std::string eval_model, eval_manifest, eval_out;
    eval_cmd->add_option("--model", eval_model, "trained model bundle")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", eval_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help text, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // bad command line counts as invalid input
    }

    if (synth_cmd->parsed()) {
        const auto manifest = synth::generate_dataset(synth_out, synth_count, synth_liners,
                                                      seed.value_or(0), synth_k);
        std::cout << "wrote " << manifest.string() << '\n';
        return 0;
    }

    if (blc_cmd->parsed()) {
        const Blc b = compute_blc(read_depth(blc_in), blc_k);
        if (blc_out.empty()) {
            std::cout.precision(17);
            for (double v : b.values) std::cout << v << '\n';
        } else {
            write_blc_text(blc_out, b);
        }
        return 0;
    }

    if (params_cmd->parsed()) {
        const Blc b = read_blc_text(params_in);
        const auto search =
            params_search == "core" ? SkSearch::CoreRestricted : SkSearch::FullSweep;
        const KParams kp = extract_k_params(b, search);
        const VolumeParams vp = extract_volume_params(b);
        nlohmann::json j{{"k", b.k()},
                         {"sk", kp.sk},
                         {"spk", kp.spk},
                         {"svk", kp.svk},
                         {"smr1", kp.smr1},
                         {"smr2", kp.smr2},
                         {"vmp", vp.vmp},
                         {"vvv", vp.vvv},
                         {"vmc", vp.vmc},
                         {"vvc", vp.vvc}};
        if (params_out.empty()) std::cout << j.dump(2) << '\n';
        else write_text(params_out, j.dump(2) + "\n");
        return 0;
    }

    if (prep_cmd->parsed()) {
        const ReflectionImage img =
            resize_bilinear(read_png(prep_in), prep_rows, prep_cols);
        const FilteredBlcStack stack = psi_transform(img, prep_k);
        const FeatureVector f = build_feature_vector(stack);
        nlohmann::json j{{"k", stack.k},
                         {"sigmas", stack.sigmas},
                         {"features", f},
                         {"curves", stack.curves}};
        if (prep_out.empty()) std::cout << j.dump() << '\n';
        else write_text(prep_out, j.dump() + "\n");
        return 0;
    }

    if (train_cmd->parsed()) {
        const PipelineConfig cfg = load_config(config_path, seed);
        ensure_dir(train_out);
        const fs::path out(train_out);
        const auto records = load_manifest(train_manifest);
        const auto base = fs::path(train_manifest).parent_path();
        auto [train_set, eval_set] = grouped_split(records, cfg.eval_fraction, cfg.seed);
        const ModelBundle bundle = train_pipeline(train_set, base, cfg);
        bundle.save(out / "model.bundle");
        write_text(out / "config.lock.json", cfg.to_json_text() + "\n");

        const EvalReport rep = evaluate(bundle, eval_set, base);
        const Blc baseline = mean_blc_baseline(train_set, base, cfg.prep.k);
        const EvalReport base_rep = evaluate_predictor(
            [&baseline](const ManifestRecord&, const ReflectionImage&) { return baseline; },
            eval_set, base, cfg.prep.k);
        write_report_csv(out / "report.csv", {{"model", rep}, {"mean-baseline", base_rep}});
        write_eval_artifacts(out, "eval", rep);
        std::cout << "held-out W1 " << rep.w1_mean << " (baseline " << base_rep.w1_mean
                  << "), Sk MAPE " << rep.sk_mape << "%\n";
        return 0;
    }

    if (cv_cmd->parsed()) {
        const PipelineConfig cfg = load_config(config_path, seed);
        ensure_dir(cv_out);
        const fs::path out(cv_out);
        const auto records = load_manifest(cv_manifest);
        const auto base = fs::path(cv_manifest).parent_path();
        const CrossvalResult res = run_crossval(records, base, cfg);
        write_text(out / "config.lock.json", cfg.to_json_text() + "\n");

        std::ofstream os(out / "crossval.csv");
        if (!os) throw IoError("cannot write crossval report");
        os.precision(10);
        os << "run,W1,W1_std,Sk_MAE_um,Sk_MAPE_pct,Sk_MAE_std,"
              "Vvv_MAE_ul_m2,Vvv_MAE_std,Vmp_MAE_ul_m2,Vmp_MAE_std\n";
        for (const auto& r : res.rows)
            os << r.label << ',' << r.w1 << ',' << r.w1_std << ',' << r.sk_mae << ','
               << r.sk_mape << ',' << r.sk_std << ',' << r.vvv_mae << ',' << r.vvv_std << ','
               << r.vmp_mae << ',' << r.vmp_std << '\n';
        for (std::size_t f = 0; f < res.fold_reports.size(); ++f)
            write_eval_artifacts(out, "fold-" + std::to_string(f + 1), res.fold_reports[f]);
        std::cout << "average W1 " << res.rows.back().w1 << " over "
                  << res.fold_reports.size() << " folds\n";
        return 0;
    }

    if (pred_cmd->parsed()) {
        const ModelBundle bundle = ModelBundle::load(pred_model);
        const ReflectionImage img = read_png(pred_in);
        const TransferResult result = predict_transfer(bundle, img);
        write_blc_text(pred_out, result.blc);
        nlohmann::json sidecar{{"params", triple_json(result.params)},
                               {"stage1_params", triple_json(result.stage1_params)},
                               {"k", result.blc.k()},
                               {"monotone_projection_applied", true},
                               {"model_hash", file_hash_hex(pred_model)},
                               {"input_hash", file_hash_hex(pred_in)}};
        write_text(fs::path(pred_out).string() + ".json", sidecar.dump(2) + "\n");
        return 0;
    }

    if (eval_cmd->parsed()) {
        const ModelBundle bundle = ModelBundle::load(eval_model);
        ensure_dir(eval_out);
        const fs::path out(eval_out);
        const auto records = load_manifest(eval_manifest);
        const auto base = fs::path(eval_manifest).parent_path();
        const EvalReport rep = evaluate(bundle, records, base);
        write_text(out / "config.lock.json", bundle.config_echo + "\n");
        write_report_csv(out / "report.csv", {{"model", rep}});
        write_eval_artifacts(out, "eval", rep);
        std::cout << "W1 " << rep.w1_mean << " +- " << rep.w1_std << ", Sk MAE " << rep.sk_mae
                  << " um (" << rep.sk_mape << "%)\n";
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const ModelFormatError& e) {
        std::cerr << "model format error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 3;
    } catch (const TrainingError& e) {
        std::cerr << "training failure: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
