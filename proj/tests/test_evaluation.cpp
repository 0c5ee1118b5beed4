#include <doctest.h>

#include "icsd/evaluation.hpp"
#include "oracles.hpp"

using namespace icsd;

TEST_CASE("point metrics hand cases") {
    std::vector<uint8_t> labels = {1, 1, 0, 0};
    std::vector<uint8_t> alerts = {1, 0, 1, 0};
    auto m = point_metrics(labels, alerts);
    CHECK(m.precision == doctest::Approx(0.5));
    CHECK(m.recall == doctest::Approx(0.5));
    CHECK(m.f1 == doctest::Approx(0.5));

    auto perfect = point_metrics(labels, labels);
    CHECK(perfect.precision == doctest::Approx(1.0));
    CHECK(perfect.recall == doctest::Approx(1.0));
    CHECK(perfect.f1 == doctest::Approx(1.0));
}

TEST_CASE("undefined ratios are flagged, not silently zero") {
    std::vector<uint8_t> attacks = {1, 1, 0};
    std::vector<uint8_t> none = {0, 0, 0};
    auto m = point_metrics(attacks, none);
    CHECK(!m.precision_defined); // no alerts at all
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);

    auto r = point_metrics(none, attacks);
    CHECK(!r.recall_defined); // no positive labels
}

TEST_CASE("batadal identities: perfect detection and total silence") {
    std::vector<uint8_t> labels = {0, 1, 1, 0, 0, 1, 1, 1, 0};
    auto perfect = batadal_score(labels, labels, 0.5);
    CHECK(perfect.s_ttd == doctest::Approx(1.0));
    CHECK(perfect.s_clf == doctest::Approx(1.0));
    CHECK(perfect.s == doctest::Approx(1.0));
    CHECK(perfect.attacks_detected == 2);

    std::vector<uint8_t> silence(labels.size(), 0);
    auto quiet = batadal_score(labels, silence, 0.5);
    CHECK(quiet.s_ttd == doctest::Approx(0.0));
    CHECK(quiet.s_clf == doctest::Approx(0.5)); // TNR 1, TPR 0
    CHECK(quiet.s == doctest::Approx(0.25));
    CHECK(quiet.attacks_detected == 0);
}

TEST_CASE("no attack intervals is an error") {
    std::vector<uint8_t> labels(10, 0);
    CHECK_THROWS_AS(batadal_score(labels, labels, 0.5), ValidationError);
}

TEST_CASE("earlier detection never lowers s_ttd") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        size_t T = 60;
        std::vector<uint8_t> labels(T, 0);
        // one attack interval
        size_t begin = 5 + rng.index(20);
        size_t len = 5 + rng.index(20);
        for (size_t t = begin; t < begin + len && t < T; ++t) labels[t] = 1;
        size_t end = std::min(begin + len, T);

        size_t late = begin + rng.index(end - begin);
        size_t early = begin + rng.index(late - begin + 1);
        std::vector<uint8_t> alert_late(T, 0), alert_early(T, 0);
        alert_late[late] = 1;
        alert_early[early] = 1;
        auto s_late = batadal_score(labels, alert_late, 0.5);
        auto s_early = batadal_score(labels, alert_early, 0.5);
        CHECK(s_early.s_ttd >= s_late.s_ttd - 1e-12);
    }
}

TEST_CASE("scores stay in [0,1] and false positives never help") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        size_t T = 80;
        std::vector<uint8_t> labels(T, 0), alerts(T, 0);
        for (size_t t = 20; t < 35; ++t) labels[t] = 1;
        for (size_t t = 0; t < T; ++t)
            if (rng.uniform() < 0.2) alerts[t] = 1;
        auto s = batadal_score(labels, alerts, 0.5);
        CHECK(s.s >= 0.0);
        CHECK(s.s <= 1.0);
        CHECK(s.s_ttd >= 0.0);
        CHECK(s.s_ttd <= 1.0);
        CHECK(s.s_clf >= 0.0);
        CHECK(s.s_clf <= 1.0);

        // adding a false-positive run cannot raise s_clf or precision
        std::vector<uint8_t> more = alerts;
        size_t fp_at = 70 + rng.index(8);
        if (!labels[fp_at]) more[fp_at] = 1;
        auto s2 = batadal_score(labels, more, 0.5);
        CHECK(s2.s_clf <= s.s_clf + 1e-12);
        auto m1 = point_metrics(labels, alerts);
        auto m2 = point_metrics(labels, more);
        if (m1.precision_defined) CHECK(m2.precision <= m1.precision + 1e-12);
    }
}

TEST_CASE("report formatting contains the metrics") {
    EvalReport rep;
    rep.metrics = point_metrics(std::vector<uint8_t>{1, 0}, std::vector<uint8_t>{1, 0});
    rep.has_batadal = true;
    rep.batadal = batadal_score(std::vector<uint8_t>{1, 0}, std::vector<uint8_t>{1, 0}, 0.5);
    auto text = format_eval_report(rep);
    CHECK(text.find("precision=") != std::string::npos);
    CHECK(text.find("s_ttd=") != std::string::npos);
    auto csv = eval_report_csv(rep);
    CHECK(csv.find("precision,recall,f1") == 0);
}
