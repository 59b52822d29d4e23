#include "surfblc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "surfblc/errors.hpp"

namespace surfblc {
namespace {

using nlohmann::json;

std::string require_string(const json& j, const char* key, bool allow_empty = false) {
    if (!j.contains(key) || !j[key].is_string())
        throw InvalidInput(std::string("manifest record missing string field '") + key + "'");
    std::string s = j[key].get<std::string>();
    if (s.empty() && !allow_empty)
        throw InvalidInput(std::string("manifest field '") + key + "' must be non-empty");
    return s;
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double pop_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / double(v.size()));
}

// linear-interpolation quantile of a pre-sorted vector
double quantile_sorted(const std::vector<double>& s, double q) {
    if (s.empty()) return 0.0;
    if (s.size() == 1) return s[0];
    const double t = q * double(s.size() - 1);
    const std::size_t i = std::min<std::size_t>(std::size_t(t), s.size() - 2);
    const double f = t - double(i);
    return s[i] * (1.0 - f) + s[i + 1] * f;
}

void five_number(std::vector<double> v, double out[5]) {
    std::sort(v.begin(), v.end());
    out[0] = v.empty() ? 0 : v.front();
    out[1] = quantile_sorted(v, 0.25);
    out[2] = quantile_sorted(v, 0.50);
    out[3] = quantile_sorted(v, 0.75);
    out[4] = v.empty() ? 0 : v.back();
}

/// Ground-truth BLC for a record; recomputed from depth if the stored curve
/// uses a different sampling than k.
Blc load_truth_blc(const ManifestRecord& rec, const std::filesystem::path& base, std::size_t k) {
    if (!rec.blc_path.empty()) {
        Blc b = read_blc_text(base / rec.blc_path);
        if (b.k() == k) return b;
    }
    return compute_blc(read_depth(base / rec.depth_path), k);
}

struct LinerGroup {
    std::string id;
    double hours = 0;            // mean over the liner's records
    std::vector<std::size_t> record_idx;
};

std::vector<LinerGroup> group_by_liner(const std::vector<ManifestRecord>& records) {
    std::map<std::string, LinerGroup> by_id;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& g = by_id[records[i].liner_id];
        g.id = records[i].liner_id;
        g.record_idx.push_back(i);
    }
    std::vector<LinerGroup> out;
    out.reserve(by_id.size());
    for (auto& [id, g] : by_id) {
        double h = 0;
        for (std::size_t i : g.record_idx) h += records[i].operating_hours;
        g.hours = h / double(g.record_idx.size());
        out.push_back(std::move(g));
    }
    return out;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write: " + path.string());
    os.precision(10);
    return os;
}

} // namespace

std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path, bool check_files) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest: " + path.string());
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw InvalidInput("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_array()) throw InvalidInput("manifest must be a JSON array of records");

    const auto base = path.parent_path();
    std::vector<ManifestRecord> out;
    std::set<std::string> seen;
    for (const auto& j : doc) {
        if (!j.is_object()) throw InvalidInput("manifest entries must be objects");
        ManifestRecord r;
        r.id = require_string(j, "id");
        r.liner_id = require_string(j, "liner_id");
        r.segment = require_string(j, "segment");
        if (!j.contains("operating_hours") || !j["operating_hours"].is_number())
            throw InvalidInput("manifest record missing numeric 'operating_hours'");
        r.operating_hours = j["operating_hours"].get<double>();
        if (!std::isfinite(r.operating_hours) || r.operating_hours < 0)
            throw InvalidInput("operating_hours must be finite and non-negative");
        r.rgb_path = require_string(j, "rgb_path");
        r.depth_path = require_string(j, "depth_path");
        r.blc_path = j.contains("blc_path") ? require_string(j, "blc_path", true) : "";
        if (!seen.insert(r.id).second)
            throw InvalidInput("duplicate manifest record id: " + r.id);
        if (check_files) {
            for (const std::string& p : {r.rgb_path, r.depth_path, r.blc_path}) {
                if (!p.empty() && !std::filesystem::exists(base / p))
                    throw InvalidInput("manifest references missing file: " + (base / p).string());
            }
        }
        out.push_back(std::move(r));
    }
    if (out.empty()) throw InvalidInput("manifest contains no records");
    return out;
}

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
    json doc = json::array();
    for (const auto& r : records) {
        doc.push_back({{"id", r.id},
                       {"liner_id", r.liner_id},
                       {"segment", r.segment},
                       {"operating_hours", r.operating_hours},
                       {"rgb_path", r.rgb_path},
                       {"depth_path", r.depth_path},
                       {"blc_path", r.blc_path}});
    }
    auto os = open_out(path);
    os << doc.dump(2) << '\n';
}

std::pair<std::vector<ManifestRecord>, std::vector<ManifestRecord>> grouped_split(
    const std::vector<ManifestRecord>& records, double eval_fraction, std::uint64_t seed) {
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
        throw InvalidInput("eval_fraction must lie in (0, 1)");
    auto liners = group_by_liner(records);
    if (liners.size() < 2)
        throw InvalidInput("grouped split needs at least two distinct liners");

    // Stratify: sort liners by mean operating hours, cut into four
    // contiguous bins, then draw eval liners round-robin across bins so the
    // held-out set covers the whole wear range.
    std::sort(liners.begin(), liners.end(), [](const LinerGroup& a, const LinerGroup& b) {
        return a.hours != b.hours ? a.hours < b.hours : a.id < b.id;
    });
    const std::size_t n_liners = liners.size();
    const std::size_t n_bins = std::min<std::size_t>(4, n_liners);
    std::vector<std::vector<std::size_t>> bins(n_bins);
    for (std::size_t i = 0; i < n_liners; ++i) bins[i * n_bins / n_liners].push_back(i);

    std::mt19937_64 rng(seed);
    for (auto& b : bins) std::shuffle(b.begin(), b.end(), rng);

    std::size_t target = std::size_t(std::lround(eval_fraction * double(n_liners)));
    target = std::clamp<std::size_t>(target, 1, n_liners - 1);

    std::vector<bool> in_eval(n_liners, false);
    std::size_t taken = 0;
    for (std::size_t round = 0; taken < target; ++round) {
        bool any = false;
        for (auto& b : bins) {
            if (round < b.size() && taken < target) {
                in_eval[b[round]] = true;
                ++taken;
                any = true;
            }
        }
        if (!any) break;
    }

    std::vector<bool> record_in_eval(records.size(), false);
    for (std::size_t i = 0; i < n_liners; ++i)
        if (in_eval[i])
            for (std::size_t r : liners[i].record_idx) record_in_eval[r] = true;

    std::pair<std::vector<ManifestRecord>, std::vector<ManifestRecord>> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        (record_in_eval[i] ? out.second : out.first).push_back(records[i]);
    return out;
}

FoldPlan make_folds(const std::vector<ManifestRecord>& records, std::size_t k,
                    std::uint64_t seed) {
    if (k < 2) throw InvalidInput("fold count must be at least 2");
    auto liners = group_by_liner(records);
    if (liners.size() < k)
        throw InvalidInput("fewer liners than folds: cannot build a grouped k-fold plan");

    std::mt19937_64 rng(seed);
    std::shuffle(liners.begin(), liners.end(), rng);
    // Largest liners first; ties keep the shuffled order.
    std::stable_sort(liners.begin(), liners.end(), [](const LinerGroup& a, const LinerGroup& b) {
        return a.record_idx.size() > b.record_idx.size();
    });

    std::vector<std::size_t> fold_liners(k, 0), fold_records(k, 0);
    FoldPlan plan;
    plan.k = k;
    for (const auto& g : liners) {
        // fewest liners first keeps liner counts within one of each other;
        // fewest records second balances record counts (largest-first greedy)
        std::size_t best = 0;
        for (std::size_t f = 1; f < k; ++f) {
            if (fold_liners[f] < fold_liners[best] ||
                (fold_liners[f] == fold_liners[best] && fold_records[f] < fold_records[best]))
                best = f;
        }
        fold_liners[best]++;
        fold_records[best] += g.record_idx.size();
        for (std::size_t r : g.record_idx) plan.assignment[records[r].id] = best;
    }
    return plan;
}

ReflectionImage flip_vertical(const ReflectionImage& img) {
    img.validate();
    ReflectionImage out = img;
    for (std::size_t r = 0; r < img.rows; ++r) {
        const std::size_t src = img.rows - 1 - r;
        std::copy_n(img.pixels.data() + src * img.cols * 3, img.cols * 3,
                    out.pixels.data() + r * img.cols * 3);
    }
    return out;
}

ReflectionImage gaussian_blur(const ReflectionImage& img, double sigma) {
    img.validate();
    if (sigma < 0 || !std::isfinite(sigma)) throw InvalidInput("blur sigma must be finite and >= 0");
    if (sigma == 0.0) return img;

    const int radius = int(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i)
        sum += kernel[i + radius] = std::exp(-double(i) * i / (2.0 * sigma * sigma));
    for (double& w : kernel) w /= sum;

    const auto rows = std::ptrdiff_t(img.rows), cols = std::ptrdiff_t(img.cols);
    std::vector<double> tmp(img.pixels.size());
    // horizontal pass, clamped borders
    for (std::ptrdiff_t r = 0; r < rows; ++r)
        for (std::ptrdiff_t c = 0; c < cols; ++c)
            for (std::size_t ch = 0; ch < 3; ++ch) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i) {
                    const auto cc = std::clamp<std::ptrdiff_t>(c + i, 0, cols - 1);
                    acc += kernel[i + radius] * img.at(std::size_t(r), std::size_t(cc), ch);
                }
                tmp[(std::size_t(r) * img.cols + std::size_t(c)) * 3 + ch] = acc;
            }
    ReflectionImage out = img;
    for (std::ptrdiff_t r = 0; r < rows; ++r)
        for (std::ptrdiff_t c = 0; c < cols; ++c)
            for (std::size_t ch = 0; ch < 3; ++ch) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i) {
                    const auto rr = std::clamp<std::ptrdiff_t>(r + i, 0, rows - 1);
                    acc += kernel[i + radius] * tmp[(std::size_t(rr) * img.cols + std::size_t(c)) * 3 + ch];
                }
                out.at(std::size_t(r), std::size_t(c), ch) =
                    std::uint8_t(std::clamp<long>(std::lround(acc), 0, 255));
            }
    return out;
}

std::vector<ReflectionImage> augment(const ReflectionImage& img, const AugmentOptions& opts) {
    std::vector<ReflectionImage> out;
    out.push_back(img);
    out.push_back(flip_vertical(img));
    out.push_back(gaussian_blur(img, opts.blur_sigma));
    if (opts.include_composed) out.push_back(gaussian_blur(out[1], opts.blur_sigma));
    return out;
}

EvalReport evaluate_predictor(const BlcPredictor& predictor,
                              const std::vector<ManifestRecord>& records,
                              const std::filesystem::path& base_dir, std::size_t k) {
    if (records.empty()) throw InvalidInput("evaluation set is empty");
    std::vector<ManifestRecord> ordered = records;
    std::sort(ordered.begin(), ordered.end(),
              [](const ManifestRecord& a, const ManifestRecord& b) { return a.id < b.id; });

    EvalReport rep;
    std::vector<double> w1s, sk_err, vvv_err, vmp_err, mapes;
    for (const auto& rec : ordered) {
        const ReflectionImage img = read_png(base_dir / rec.rgb_path);
        const Blc truth = load_truth_blc(rec, base_dir, k);
        const Blc pred = predictor(rec, img);
        if (pred.k() != k) throw InvalidInput("predictor returned a BLC of unexpected length");

        SampleEval s;
        s.id = rec.id;
        s.hours = rec.operating_hours;
        s.w1 = wasserstein1(pred, truth);
        const KParams kp_p = extract_k_params(pred), kp_t = extract_k_params(truth);
        const VolumeParams vp_p = extract_volume_params(pred), vp_t = extract_volume_params(truth);
        s.sk_pred = kp_p.sk;
        s.sk_true = kp_t.sk;
        s.vvv_pred = vp_p.vvv;
        s.vvv_true = vp_t.vvv;
        s.vmp_pred = vp_p.vmp;
        s.vmp_true = vp_t.vmp;
        const AreaQuartiles q_p = blc_area_quartiles(pred), q_t = blc_area_quartiles(truth);
        s.q_pred[0] = q_p.q25; s.q_pred[1] = q_p.q50; s.q_pred[2] = q_p.q75;
        s.q_true[0] = q_t.q25; s.q_true[1] = q_t.q50; s.q_true[2] = q_t.q75;

        w1s.push_back(s.w1);
        sk_err.push_back(std::abs(s.sk_pred - s.sk_true));
        vvv_err.push_back(std::abs(s.vvv_pred - s.vvv_true));
        vmp_err.push_back(std::abs(s.vmp_pred - s.vmp_true));
        if (s.sk_true > 0) mapes.push_back(100.0 * std::abs(s.sk_pred - s.sk_true) / s.sk_true);
        rep.samples.push_back(std::move(s));
    }

    rep.w1_mean = mean(w1s);
    rep.w1_std = pop_std(w1s);
    rep.sk_mae = mean(sk_err);
    rep.sk_std = pop_std(sk_err);
    rep.sk_mape = mean(mapes);
    rep.vvv_mae = mean(vvv_err);
    rep.vvv_std = pop_std(vvv_err);
    rep.vmp_mae = mean(vmp_err);
    rep.vmp_std = pop_std(vmp_err);

    // operating-hour quartile bins of the evaluated samples
    std::vector<double> hours;
    for (const auto& s : rep.samples) hours.push_back(s.hours);
    std::sort(hours.begin(), hours.end());
    const double q1 = quantile_sorted(hours, 0.25), q2 = quantile_sorted(hours, 0.50),
                 q3 = quantile_sorted(hours, 0.75);
    const double edges[5] = {hours.front(), q1, q2, q3, hours.back()};
    for (int b = 0; b < 4; ++b) {
        HourBinSummary bin;
        bin.lo = edges[b];
        bin.hi = edges[b + 1];
        std::vector<double> bw, bd;
        for (const auto& s : rep.samples) {
            const bool in = b == 3 ? (s.hours >= bin.lo && s.hours <= bin.hi)
                                   : (s.hours >= bin.lo && s.hours < bin.hi);
            if (!in) continue;
            bw.push_back(s.w1);
            bd.push_back(s.sk_pred - s.sk_true);
        }
        bin.count = bw.size();
        if (!bw.empty()) {
            five_number(bw, bin.w1_box);
            five_number(bd, bin.sk_diff_box);
        }
        rep.hour_bins.push_back(bin);
    }
    return rep;
}

EvalReport evaluate(const ModelBundle& bundle, const std::vector<ManifestRecord>& records,
                    const std::filesystem::path& base_dir) {
    return evaluate_predictor(
        [&bundle](const ManifestRecord&, const ReflectionImage& img) {
            return predict_transfer(bundle, img).blc;
        },
        records, base_dir, bundle.prep.k);
}

Blc mean_blc_baseline(const std::vector<ManifestRecord>& records,
                      const std::filesystem::path& base_dir, std::size_t k) {
    if (records.empty()) throw InvalidInput("cannot build a baseline from zero records");
    std::vector<double> acc(k, 0.0);
    for (const auto& rec : records) {
        const Blc b = load_truth_blc(rec, base_dir, k);
        for (std::size_t i = 0; i < k; ++i) acc[i] += b[i];
    }
    for (double& v : acc) v /= double(records.size());
    return Blc(std::move(acc));  // mean of non-increasing curves is non-increasing
}

void write_report_csv(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, EvalReport>>& rows) {
    auto os = open_out(path);
    // volume errors reported in ul/m^2 (internal unit: ml/m^2, numerically um)
    os << "run,W1,W1_std,Sk_MAE_um,Sk_MAPE_pct,Sk_MAE_std,"
          "Vvv_MAE_ul_m2,Vvv_MAE_std,Vmp_MAE_ul_m2,Vmp_MAE_std\n";
    for (const auto& [label, r] : rows) {
        os << csv_escape(label) << ',' << r.w1_mean << ',' << r.w1_std << ',' << r.sk_mae << ','
           << r.sk_mape << ',' << r.sk_std << ',' << 1e3 * r.vvv_mae << ',' << 1e3 * r.vvv_std
           << ',' << 1e3 * r.vmp_mae << ',' << 1e3 * r.vmp_std << '\n';
    }
}

void write_samples_csv(const std::filesystem::path& path, const EvalReport& report) {
    auto os = open_out(path);
    os << "id,operating_hours,W1,Sk_pred,Sk_true,Vvv_pred,Vvv_true,Vmp_pred,Vmp_true\n";
    for (const auto& s : report.samples)
        os << csv_escape(s.id) << ',' << s.hours << ',' << s.w1 << ',' << s.sk_pred << ','
           << s.sk_true << ',' << s.vvv_pred << ',' << s.vvv_true << ',' << s.vmp_pred << ','
           << s.vmp_true << '\n';
}

void write_quartile_scatter_csv(const std::filesystem::path& path, const EvalReport& report) {
    auto os = open_out(path);
    os << "id,quartile,predicted,truth\n";
    static const char* names[3] = {"q25", "q50", "q75"};
    for (const auto& s : report.samples)
        for (int q = 0; q < 3; ++q)
            os << csv_escape(s.id) << ',' << names[q] << ',' << s.q_pred[q] << ',' << s.q_true[q]
               << '\n';
}

namespace {

struct SvgCanvas {
    std::ostringstream body;
    double w, h;
    SvgCanvas(double w_, double h_) : w(w_), h(h_) {}
    std::string finish() const {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
           << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << body.str() << "</svg>\n";
        return os.str();
    }
};

void svg_text(SvgCanvas& c, double x, double y, const std::string& t, int size = 12,
              const char* anchor = "middle") {
    c.body << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
           << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << t
           << "</text>\n";
}

} // namespace

void write_quartile_scatter_svg(const std::filesystem::path& path, const EvalReport& report) {
    const double panel = 260, margin = 45, gap = 25;
    SvgCanvas svg(3 * panel + 2 * gap + 2 * margin, panel + 2 * margin);
    static const char* names[3] = {"25% ratio", "50% ratio", "75% ratio"};
    for (int q = 0; q < 3; ++q) {
        double lo = 1e300, hi = -1e300;
        for (const auto& s : report.samples) {
            lo = std::min({lo, s.q_pred[q], s.q_true[q]});
            hi = std::max({hi, s.q_pred[q], s.q_true[q]});
        }
        if (!(hi > lo)) { lo -= 0.5; hi += 0.5; }
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
        const double x0 = margin + q * (panel + gap), y0 = margin;
        auto px = [&](double v) { return x0 + (v - lo) / (hi - lo) * panel; };
        auto py = [&](double v) { return y0 + panel - (v - lo) / (hi - lo) * panel; };
        svg.body << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << panel
                 << "\" height=\"" << panel << "\" fill=\"none\" stroke=\"black\"/>\n";
        svg.body << "<line x1=\"" << px(lo) << "\" y1=\"" << py(lo) << "\" x2=\"" << px(hi)
                 << "\" y2=\"" << py(hi) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
        for (const auto& s : report.samples)
            svg.body << "<circle cx=\"" << px(s.q_true[q]) << "\" cy=\"" << py(s.q_pred[q])
                     << "\" r=\"2.5\" fill=\"steelblue\" fill-opacity=\"0.6\"/>\n";
        svg_text(svg, x0 + panel / 2, y0 - 8, std::string("BLC height at ") + names[q]);
        svg_text(svg, x0 + panel / 2, y0 + panel + 28, "truth");
    }
    svg_text(svg, 16, margin + panel / 2, "predicted", 12, "middle");
    auto os = open_out(path);
    os << svg.finish();
}

void write_hours_csv(const std::filesystem::path& path, const EvalReport& report) {
    auto os = open_out(path);
    os << "bin_lo_hours,bin_hi_hours,count,"
          "W1_min,W1_q25,W1_median,W1_q75,W1_max,"
          "Sk_diff_min,Sk_diff_q25,Sk_diff_median,Sk_diff_q75,Sk_diff_max\n";
    for (const auto& b : report.hour_bins) {
        os << b.lo << ',' << b.hi << ',' << b.count;
        for (double v : b.w1_box) os << ',' << v;
        for (double v : b.sk_diff_box) os << ',' << v;
        os << '\n';
    }
}

void write_hours_boxplot_svg(const std::filesystem::path& path, const EvalReport& report) {
    const double panel_w = 420, panel_h = 180, margin = 50, gap = 40;
    SvgCanvas svg(panel_w + 2 * margin, 2 * panel_h + gap + 2 * margin);
    const char* titles[2] = {"W1 distance by operating-hour quartile bin",
                             "Sk error (pred - truth) by operating-hour quartile bin"};
    for (int row = 0; row < 2; ++row) {
        double lo = 1e300, hi = -1e300;
        for (const auto& b : report.hour_bins) {
            if (b.count == 0) continue;
            const double* box = row == 0 ? b.w1_box : b.sk_diff_box;
            lo = std::min(lo, box[0]);
            hi = std::max(hi, box[4]);
        }
        if (!(hi > lo)) { lo -= 0.5; hi += 0.5; }
        const double pad = 0.08 * (hi - lo);
        lo -= pad;
        hi += pad;
        const double y0 = margin + row * (panel_h + gap);
        auto py = [&](double v) { return y0 + panel_h - (v - lo) / (hi - lo) * panel_h; };
        svg.body << "<rect x=\"" << margin << "\" y=\"" << y0 << "\" width=\"" << panel_w
                 << "\" height=\"" << panel_h << "\" fill=\"none\" stroke=\"black\"/>\n";
        const double slot = panel_w / double(std::max<std::size_t>(report.hour_bins.size(), 1));
        for (std::size_t i = 0; i < report.hour_bins.size(); ++i) {
            const auto& b = report.hour_bins[i];
            const double cx = margin + (double(i) + 0.5) * slot, bw = slot * 0.4;
            char label[64];
            std::snprintf(label, sizeof label, "%.0f-%.0f h (n=%zu)", b.lo, b.hi, b.count);
            svg_text(svg, cx, y0 + panel_h + 16, label, 10);
            if (b.count == 0) continue;
            const double* box = row == 0 ? b.w1_box : b.sk_diff_box;
            svg.body << "<line x1=\"" << cx << "\" y1=\"" << py(box[0]) << "\" x2=\"" << cx
                     << "\" y2=\"" << py(box[4]) << "\" stroke=\"black\"/>\n";
            svg.body << "<rect x=\"" << cx - bw / 2 << "\" y=\"" << py(box[3]) << "\" width=\""
                     << bw << "\" height=\"" << std::max(py(box[1]) - py(box[3]), 0.5)
                     << "\" fill=\"lightsteelblue\" stroke=\"black\"/>\n";
            svg.body << "<line x1=\"" << cx - bw / 2 << "\" y1=\"" << py(box[2]) << "\" x2=\""
                     << cx + bw / 2 << "\" y2=\"" << py(box[2])
                     << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        }
        svg_text(svg, margin + panel_w / 2, y0 - 8, titles[row]);
    }
    auto os = open_out(path);
    os << svg.finish();
}

PipelineConfig PipelineConfig::defaults() {
    PipelineConfig c;
    c.stage1.epochs = 30;
    c.stage1.lr = 1e-3;
    c.stage2.epochs = 40;
    c.stage2.lr = 4e-4;
    return c;
}

namespace {

void parse_train_section(const json& j, TrainConfig& t, const std::string& name) {
    for (const auto& [key, val] : j.items()) {
        try {
            if (key == "epochs") t.epochs = val.get<std::size_t>();
            else if (key == "lr") t.lr = val.get<double>();
            else if (key == "batch_size") t.batch_size = val.get<std::size_t>();
            else if (key == "seed") t.seed = val.get<std::uint64_t>();
            else if (key == "standardize_inputs") t.standardize_inputs = val.get<bool>();
            else if (key == "scheduler_patience") t.scheduler_patience = val.get<int>();
            else if (key == "scheduler_factor") t.scheduler_factor = val.get<double>();
            else if (key == "loss") {
                const std::string s = val.get<std::string>();
                if (s == "mae") t.loss = TrainConfig::Loss::Mae;
                else if (s == "mse") t.loss = TrainConfig::Loss::Mse;
                else throw ConfigError("loss must be 'mae' or 'mse'");
            } else {
                throw ConfigError("unknown key '" + key + "' in config section '" + name + "'");
            }
        } catch (const json::exception& e) {
            throw ConfigError("bad value for '" + name + "." + key + "': " + e.what());
        }
    }
    if (t.epochs == 0 || !(t.lr > 0) || t.batch_size == 0 || t.scheduler_patience <= 0 ||
        !(t.scheduler_factor > 0 && t.scheduler_factor <= 1))
        throw ConfigError("invalid training hyperparameters in section '" + name + "'");
}

} // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");

    PipelineConfig c = defaults();
    for (const auto& [key, val] : doc.items()) {
        try {
            if (key == "k") c.prep.k = val.get<std::size_t>();
            else if (key == "resize") {
                if (!val.is_array() || val.size() != 2)
                    throw ConfigError("'resize' must be [rows, cols]");
                c.prep.resize_rows = val[0].get<std::size_t>();
                c.prep.resize_cols = val[1].get<std::size_t>();
            } else if (key == "stage1") parse_train_section(val, c.stage1, "stage1");
            else if (key == "stage2") parse_train_section(val, c.stage2, "stage2");
            else if (key == "eval_fraction") c.eval_fraction = val.get<double>();
            else if (key == "folds") c.folds = val.get<std::size_t>();
            else if (key == "seed") c.seed = val.get<std::uint64_t>();
            else if (key == "augment") {
                for (const auto& [ak, av] : val.items()) {
                    if (ak == "enabled") c.augment_train = av.get<bool>();
                    else if (ak == "blur_sigma") c.aug.blur_sigma = av.get<double>();
                    else if (ak == "composed") c.aug.include_composed = av.get<bool>();
                    else throw ConfigError("unknown key 'augment." + ak + "'");
                }
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        } catch (const json::exception& e) {
            throw ConfigError("bad value for config key '" + key + "': " + e.what());
        }
    }
    if (c.prep.k < 10) throw ConfigError("k must be at least 10");
    if (c.prep.resize_rows < 16 || c.prep.resize_cols < 16)
        throw ConfigError("resize target must be at least 16x16");
    if (!(c.eval_fraction > 0 && c.eval_fraction < 1))
        throw ConfigError("eval_fraction must lie in (0, 1)");
    if (c.folds < 2) throw ConfigError("folds must be at least 2");
    if (c.aug.blur_sigma < 0 || !std::isfinite(c.aug.blur_sigma))
        throw ConfigError("augment.blur_sigma must be finite and >= 0");
    return c;
}

std::string PipelineConfig::to_json_text() const {
    auto train_json = [](const TrainConfig& t) {
        return json{{"epochs", t.epochs},
                    {"lr", t.lr},
                    {"loss", t.loss == TrainConfig::Loss::Mae ? "mae" : "mse"},
                    {"batch_size", t.batch_size},
                    {"seed", t.seed},
                    {"standardize_inputs", t.standardize_inputs},
                    {"scheduler_patience", t.scheduler_patience},
                    {"scheduler_factor", t.scheduler_factor}};
    };
    json doc{{"k", prep.k},
             {"resize", {prep.resize_rows, prep.resize_cols}},
             {"stage1", train_json(stage1)},
             {"stage2", train_json(stage2)},
             {"eval_fraction", eval_fraction},
             {"folds", folds},
             {"seed", seed},
             {"augment",
              {{"enabled", augment_train},
               {"blur_sigma", aug.blur_sigma},
               {"composed", aug.include_composed}}}};
    return doc.dump(2);
}

ModelBundle train_pipeline(const std::vector<ManifestRecord>& records,
                           const std::filesystem::path& base_dir,
                           const PipelineConfig& config) {
    if (records.empty()) throw InvalidInput("training set is empty");

    struct Prepared {
        FilteredBlcStack stack;
        FeatureVector features;
        ParamTriple triple;
        Blc truth;
    };
    std::vector<Prepared> prepared;
    for (const auto& rec : records) {
        const ReflectionImage raw = read_png(base_dir / rec.rgb_path);
        const Blc truth = load_truth_blc(rec, base_dir, config.prep.k);
        ParamTriple triple;
        triple.sk = extract_k_params(truth).sk;
        const VolumeParams vp = extract_volume_params(truth);
        triple.vvv = vp.vvv;
        triple.vmp = vp.vmp;

        std::vector<ReflectionImage> variants;
        if (config.augment_train) variants = augment(raw, config.aug);
        else variants.push_back(raw);
        for (const auto& v : variants) {
            Prepared p;
            p.stack = psi_transform(resize_bilinear(v, config.prep.resize_rows,
                                                    config.prep.resize_cols),
                                    config.prep.k);
            p.features = build_feature_vector(p.stack);
            p.triple = triple;   // label-preserving augmentation
            p.truth = truth;
            prepared.push_back(std::move(p));
        }
    }

    std::vector<ParamSample> s1;
    s1.reserve(prepared.size());
    for (const auto& p : prepared) s1.emplace_back(p.features, p.triple);
    ModelBundle bundle;
    bundle.stage1 = train_params(s1, config.stage1);

    std::vector<BlcSample> s2;
    s2.reserve(prepared.size());
    for (const auto& p : prepared) {
        const auto z = bundle.stage1.predict_standardized(p.features);
        s2.emplace_back(assemble_input(p.stack, z), p.truth);
    }
    bundle.stage2 = train_blc(s2, config.stage2);
    bundle.prep = config.prep;
    bundle.config_echo = config.to_json_text();
    return bundle;
}

MetricRow metric_row(const std::string& label, const EvalReport& r) {
    MetricRow m;
    m.label = label;
    m.w1 = r.w1_mean;
    m.w1_std = r.w1_std;
    m.sk_mae = r.sk_mae;
    m.sk_mape = r.sk_mape;
    m.sk_std = r.sk_std;
    // metric rows carry volume errors in ul/m^2 (Table-style reporting unit)
    m.vvv_mae = 1e3 * r.vvv_mae;
    m.vvv_std = 1e3 * r.vvv_std;
    m.vmp_mae = 1e3 * r.vmp_mae;
    m.vmp_std = 1e3 * r.vmp_std;
    return m;
}

CrossvalResult run_crossval(const std::vector<ManifestRecord>& records,
                            const std::filesystem::path& base_dir,
                            const PipelineConfig& config) {
    const FoldPlan plan = make_folds(records, config.folds, config.seed);
    CrossvalResult result;
    for (std::size_t f = 0; f < plan.k; ++f) {
        std::vector<ManifestRecord> train, heldout;
        for (const auto& r : records)
            (plan.assignment.at(r.id) == f ? heldout : train).push_back(r);
        if (train.empty() || heldout.empty())
            throw InvalidInput("cross-validation produced an empty fold");
        const ModelBundle bundle = train_pipeline(train, base_dir, config);
        EvalReport rep = evaluate(bundle, heldout, base_dir);
        result.rows.push_back(metric_row("fold-" + std::to_string(f + 1), rep));
        result.fold_reports.push_back(std::move(rep));
    }
    MetricRow avg;
    avg.label = "avg";
    for (const auto& r : result.rows) {
        avg.w1 += r.w1;
        avg.w1_std += r.w1_std;
        avg.sk_mae += r.sk_mae;
        avg.sk_mape += r.sk_mape;
        avg.sk_std += r.sk_std;
        avg.vvv_mae += r.vvv_mae;
        avg.vvv_std += r.vvv_std;
        avg.vmp_mae += r.vmp_mae;
        avg.vmp_std += r.vmp_std;
    }
    const double n = double(result.rows.size());
    avg.w1 /= n; avg.w1_std /= n; avg.sk_mae /= n; avg.sk_mape /= n; avg.sk_std /= n;
    avg.vvv_mae /= n; avg.vvv_std /= n; avg.vmp_mae /= n; avg.vmp_std /= n;
    result.rows.push_back(std::move(avg));
    return result;
}

std::string file_hash_hex(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for hashing: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= std::uint8_t(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!is) break;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

} // namespace surfblc
