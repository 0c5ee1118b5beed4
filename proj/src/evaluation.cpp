#include "icsd/evaluation.hpp"

#include <sstream>

namespace icsd {

PointMetrics point_metrics(std::span<const uint8_t> labels, std::span<const uint8_t> alerts) {
    require(labels.size() == alerts.size(), "labels and alerts must have equal length");
    PointMetrics m;
    for (size_t t = 0; t < labels.size(); ++t) {
        if (labels[t] && alerts[t])
            ++m.tp;
        else if (!labels[t] && alerts[t])
            ++m.fp;
        else if (labels[t] && !alerts[t])
            ++m.fn;
        else
            ++m.tn;
    }
    m.precision_defined = m.tp + m.fp > 0;
    m.recall_defined = m.tp + m.fn > 0;
    m.precision = m.precision_defined ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = m.recall_defined ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                          : 0.0;
    return m;
}

BatadalScore batadal_score(std::span<const uint8_t> labels, std::span<const uint8_t> alerts,
                           double gamma) {
    require(labels.size() == alerts.size(), "labels and alerts must have equal length");
    require(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0,1]");
    BatadalScore s;
    s.gamma = gamma;

    // maximal attack intervals
    double ratio_sum = 0.0;
    size_t t = 0;
    const size_t T = labels.size();
    while (t < T) {
        if (!labels[t]) {
            ++t;
            continue;
        }
        size_t begin = t;
        while (t < T && labels[t]) ++t;
        size_t end = t; // exclusive
        ++s.attack_count;
        size_t first_alert = end;
        for (size_t i = begin; i < end; ++i)
            if (alerts[i]) {
                first_alert = i;
                break;
            }
        if (first_alert < end) {
            ++s.attacks_detected;
            ratio_sum += static_cast<double>(first_alert - begin) / static_cast<double>(end - begin);
        } else {
            ratio_sum += 1.0; // undetected
        }
    }
    if (s.attack_count == 0) throw ValidationError("batadal score requires at least one attack interval");
    s.s_ttd = 1.0 - ratio_sum / static_cast<double>(s.attack_count);

    PointMetrics m = point_metrics(labels, alerts);
    double tpr = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    double tnr = m.tn + m.fp > 0 ? static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp) : 1.0;
    s.s_clf = 0.5 * (tpr + tnr);
    s.s = gamma * s.s_ttd + (1.0 - gamma) * s.s_clf;
    return s;
}

std::string format_eval_report(const EvalReport& r) {
    std::ostringstream out;
    out << "precision=" << (r.metrics.precision_defined ? std::to_string(r.metrics.precision) : "undefined")
        << "\nrecall=" << (r.metrics.recall_defined ? std::to_string(r.metrics.recall) : "undefined")
        << "\nf1=" << r.metrics.f1 << "\ntp=" << r.metrics.tp << "\nfp=" << r.metrics.fp
        << "\nfn=" << r.metrics.fn << "\ntn=" << r.metrics.tn << '\n';
    if (r.has_batadal) {
        out << "s=" << r.batadal.s << "\ns_ttd=" << r.batadal.s_ttd << "\ns_clf=" << r.batadal.s_clf
            << "\ngamma=" << r.batadal.gamma << "\nattacks_detected=" << r.batadal.attacks_detected
            << "\nattack_count=" << r.batadal.attack_count
            << "\n# s_ttd/s_clf follow the competition conventions (balanced accuracy for s_clf)\n";
    }
    return out.str();
}

std::string eval_report_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "precision,recall,f1,tp,fp,fn,tn,s,s_ttd,s_clf,attacks_detected,attack_count\n";
    out << r.metrics.precision << ',' << r.metrics.recall << ',' << r.metrics.f1 << ','
        << r.metrics.tp << ',' << r.metrics.fp << ',' << r.metrics.fn << ',' << r.metrics.tn << ',';
    if (r.has_batadal)
        out << r.batadal.s << ',' << r.batadal.s_ttd << ',' << r.batadal.s_clf << ','
            << r.batadal.attacks_detected << ',' << r.batadal.attack_count;
    else
        out << ",,,,";
    out << '\n';
    return out.str();
}

} // namespace icsd
