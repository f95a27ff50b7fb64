#include "mwreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mwreg/deformation.hpp"
#include "mwreg/dice.hpp"

namespace mwreg {

std::string_view method_name(int method)
{
    if (method == kMultiMetric)
        return "mw";
    return metric_name(kAllMetrics.at(method));
}

WeightMatrix single_metric_weights(Metric m, double metric_weight, double pairwise_weight)
{
    WeightVector w;
    w.metric[static_cast<int>(m)] = metric_weight;
    w.pairwise = pairwise_weight;
    return WeightMatrix({w});
}

std::vector<EvalRow> evaluate_pairs(const std::vector<TrainSample>& pairs, std::size_t num_classes,
                                    const WeightMatrix& mw, const EvalOptions& opts)
{
    std::vector<ClassId> classes = opts.classes;
    if (classes.empty()) {
        for (std::size_t c = 1; c < num_classes; ++c)
            classes.push_back(static_cast<ClassId>(c));
    }
    std::vector<EvalRow> rows;
    for (const auto& p : pairs) {
        if (!(p.source.geometry() == p.target.geometry()))
            throw std::invalid_argument("pair " + p.id + ": source and target geometries differ");
        std::vector<EvalRow> pair_rows(classes.size());
        for (std::size_t k = 0; k < classes.size(); ++k) {
            pair_rows[k].pair_id = p.id;
            pair_rows[k].class_id = classes[k];
        }
        for (int method = 0; method < kNumMethods; ++method) {
            if (method != kMultiMetric && !opts.baselines[method]) {
                for (auto& row : pair_rows)
                    row.dice[method] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            const WeightMatrix w = method == kMultiMetric
                                       ? mw
                                       : single_metric_weights(kAllMetrics[method], opts.single_metric_weight,
                                                               opts.single_pairwise_weight);
            const RegistrationResult r = register_images(p.source, p.target, &p.source_mask, w, opts.registration);
            const SegMask warped = warp_mask(p.source_mask, r.field);
            for (std::size_t k = 0; k < classes.size(); ++k)
                pair_rows[k].dice[method] = exact_dice(warped, p.target_mask, classes[k]);
        }
        rows.insert(rows.end(), pair_rows.begin(), pair_rows.end());
    }
    return rows;
}

std::vector<EvalRow> class_means(const std::vector<EvalRow>& rows)
{
    std::vector<EvalRow> means;
    std::vector<int> counts;
    for (const auto& r : rows) {
        auto it = std::find_if(means.begin(), means.end(), [&](const EvalRow& m) { return m.class_id == r.class_id; });
        if (it == means.end()) {
            means.push_back({"mean", r.class_id, {}});
            counts.push_back(0);
            it = means.end() - 1;
        }
        const auto k = static_cast<std::size_t>(it - means.begin());
        for (int m = 0; m < kNumMethods; ++m)
            it->dice[m] += r.dice[m];
        ++counts[k];
    }
    for (std::size_t k = 0; k < means.size(); ++k) {
        for (auto& d : means[k].dice)
            d /= counts[k];
    }
    return means;
}

std::string eval_csv(const std::vector<EvalRow>& rows)
{
    std::ostringstream os;
    os << "pair_id,class";
    for (int m = 0; m < kNumMethods; ++m)
        os << ',' << method_name(m);
    os << '\n';
    auto emit = [&](const EvalRow& r) {
        os << r.pair_id << ',' << int(r.class_id);
        char buf[32];
        for (double d : r.dice) {
            std::snprintf(buf, sizeof buf, ",%.6f", d);
            os << buf;
        }
        os << '\n';
    };
    for (const auto& r : rows)
        emit(r);
    for (const auto& r : class_means(rows))
        emit(r);
    return os.str();
}

namespace {

double quantile(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

} // namespace

std::string eval_svg(const std::vector<EvalRow>& rows)
{
    std::map<ClassId, std::array<std::vector<double>, kNumMethods>> groups;
    for (const auto& r : rows) {
        for (int m = 0; m < kNumMethods; ++m) {
            if (!std::isnan(r.dice[m]))
                groups[r.class_id][m].push_back(r.dice[m]);
        }
    }
    const double box_w = 18, gap = 8, group_gap = 30, left = 50, top = 20, plot_h = 300;
    const double group_w = kNumMethods * (box_w + gap);
    const double width = left + groups.size() * (group_w + group_gap) + 20;
    const double height = top + plot_h + 60;
    auto y_of = [&](double d) { return top + (1.0 - std::clamp(d, 0.0, 1.0)) * plot_h; };
    static const char* colours[kNumMethods] = {"#8da0cb", "#66c2a5", "#fc8d62", "#e78ac3", "#a6d854"};

    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                  "font-size=\"11\">\n",
                  width, height);
    os << buf;
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int t = 0; t <= 10; t += 2) {
        const double y = y_of(t / 10.0);
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>"
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.1f</text>\n",
                      left, y, width - 10, y, left - 4, y + 4, t / 10.0);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"12\" y=\"%.1f\" transform=\"rotate(-90 12 %.1f)\">dice</text>\n",
                  top + plot_h / 2, top + plot_h / 2);
    os << buf;

    double x0 = left + group_gap / 2;
    for (const auto& [cls, values] : groups) {
        for (int m = 0; m < kNumMethods; ++m) {
            const auto& v = values[m];
            if (v.empty())
                continue;
            const double x = x0 + m * (box_w + gap);
            const double cx = x + box_w / 2;
            const double q1 = quantile(v, 0.25), q3 = quantile(v, 0.75), med = quantile(v, 0.5);
            const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
            double mean = 0.0;
            for (double d : v)
                mean += d;
            mean /= v.size();
            std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                          cx, y_of(hi), cx, y_of(lo));
            os << buf;
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"%s\" stroke=\"black\"/>\n", x,
                          y_of(q3), box_w, std::max(0.5, y_of(q1) - y_of(q3)), colours[m]);
            os << buf;
            std::snprintf(buf, sizeof buf,
                          "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"red\" stroke-width=\"2\"/>\n", x,
                          y_of(med), x + box_w, y_of(med));
            os << buf;
            std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"6\" height=\"6\" fill=\"red\"/>\n",
                          cx - 3, y_of(mean) - 3);
            os << buf;
            std::snprintf(buf, sizeof buf,
                          "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%s</text>\n", cx, top + plot_h + 14,
                          std::string(method_name(m)).c_str());
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">class %d</text>\n",
                      x0 + group_w / 2, top + plot_h + 34, int(cls));
        os << buf;
        x0 += group_w + group_gap;
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace mwreg
