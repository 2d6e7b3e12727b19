#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "s3/config.hpp"
#include "s3/driver.hpp"
#include "s3/evaluate.hpp"
#include "s3/stream.hpp"

using Catch::Approx;
using namespace s3;

namespace {

S3Config base_config() {
    S3Config cfg;
    cfg.map.family = "cat";
    cfg.field.type = "sinusoid";
    cfg.field.amplitude = 1.0;
    cfg.field.wave_x = 1;
    cfg.field.wave_y = 1;
    cfg.field.direction = {0.0, 1.0};
    cfg.observable.type = "harmonic";
    cfg.observable.amplitude = 1.0;
    cfg.observable.wave_x = 1;
    cfg.observable.wave_y = 1;
    cfg.quadrature.samples = 200000;
    cfg.seed = 5;
    return cfg;
}

double resummed_total(const SensitivityReport& rep) {
    double s = rep.coboundary.mean;
    for (const MonteCarloEstimate& t : rep.terms) s += t.mean;
    return s;
}

}  // namespace

TEST_CASE("a zero field produces an exactly zero report", "[s3_driver]") {
    S3Config cfg = base_config();
    cfg.field = FieldSpec{};  // type zero
    cfg.quadrature.samples = 20000;
    const SensitivityReport rep = run_s3(cfg);
    CHECK(rep.psi_total == 0.0);
    CHECK(rep.coboundary.mean == 0.0);
    CHECK(rep.coboundary.std_error == 0.0);
    CHECK(rep.mean_rho.mean == 0.0);
    for (const MonteCarloEstimate& t : rep.terms) {
        CHECK(t.mean == 0.0);
        CHECK(t.std_error == 0.0);
    }
}

TEST_CASE("a constant observable has zero response within its bar", "[s3_driver]") {
    S3Config cfg = base_config();
    cfg.observable = ObservableSpec{};
    cfg.observable.type = "constant";
    cfg.observable.value = 0.37;
    cfg.quadrature.samples = 50000;
    const SensitivityReport rep = run_s3(cfg);
    CHECK(rep.coboundary.mean == 0.0);  // gradient of a constant vanishes identically
    CHECK(std::abs(rep.psi_total) <= 3.0 * rep.total_std_error);
}

TEST_CASE("the response of an exact coboundary telescopes away", "[s3_driver]") {
    // X = V0 - T_* V0 contributes exactly mu(V0 f) = 0 for these harmonics
    S3Config cfg = base_config();
    FieldSpec v0;
    v0.type = "sinusoid";
    v0.amplitude = 0.1;
    v0.wave_x = 0;
    v0.wave_y = 1;
    v0.direction = {1.0, 0.0};
    cfg.field = FieldSpec{};
    cfg.field.type = "coboundary";
    cfg.field.of = std::make_shared<FieldSpec>(v0);
    cfg.observable.wave_x = 1;
    cfg.observable.wave_y = 0;
    const SensitivityReport rep = run_s3(cfg);
    CHECK(rep.total_std_error > 0.0);
    CHECK(std::abs(rep.psi_total) <= 3.0 * rep.total_std_error);
}

TEST_CASE("a shear along x+y recovers the closed-form response", "[s3_driver]") {
    // X = (0, sin 2 pi (x+y)), f = cos 2 pi (x+y): the response is -pi
    S3Config cfg = base_config();
    cfg.quadrature.samples = 1000000;
    const SensitivityReport rep = run_s3(cfg);

    CHECK(std::abs(rep.psi_total + std::numbers::pi) <= 3.0 * rep.total_std_error);
    CHECK(rep.total_std_error < 0.05);

    // the reported total is the reported parts, summed in index order
    CHECK(rep.psi_total == resummed_total(rep));

    // both checkpoints agree with the windowed machinery to rounding
    REQUIRE(rep.checkpoints.size() == 2);
    for (const CheckpointDiagnostics& d : rep.checkpoints) {
        CHECK(d.stream_vs_window < 1e-12);
        CHECK(d.parallel_residual < 1e-12);
        CHECK(d.rho0_residual < 1e-12);
    }

    // at a million samples the default windows sit just under the advisory
    // 3 log10(N) / |log10 eta| threshold, so both lift windows warn
    CHECK(rep.warnings.size() == 2);
}

TEST_CASE("the response is additive in the perturbing field", "[s3_driver]") {
    S3Config cfg1 = base_config();
    cfg1.quadrature.samples = 30000;

    S3Config cfg2 = cfg1;
    cfg2.field = FieldSpec{};
    cfg2.field.type = "sinusoid";
    cfg2.field.amplitude = 0.5;
    cfg2.field.wave_x = 1;
    cfg2.field.wave_y = 0;
    cfg2.field.direction = {1.0, 0.0};

    S3Config cfg_sum = cfg1;
    cfg_sum.field = FieldSpec{};
    cfg_sum.field.type = "sum";
    cfg_sum.field.terms = {std::make_shared<FieldSpec>(cfg1.field),
                           std::make_shared<FieldSpec>(cfg2.field)};

    const SensitivityReport r1 = run_s3(cfg1);
    const SensitivityReport r2 = run_s3(cfg2);
    const SensitivityReport rsum = run_s3(cfg_sum);
    CHECK(std::abs(rsum.psi_total - (r1.psi_total + r2.psi_total)) < 1e-10);
}

TEST_CASE("identical configuration and seed reproduce the report exactly", "[s3_driver]") {
    S3Config cfg = base_config();
    cfg.quadrature.samples = 30000;
    const SensitivityReport a = run_s3(cfg);
    const SensitivityReport b = run_s3(cfg);
    CHECK(a.psi_total == b.psi_total);
    CHECK(a.total_std_error == b.total_std_error);
    CHECK(a.coboundary.mean == b.coboundary.mean);
    REQUIRE(a.terms.size() == b.terms.size());
    for (std::size_t k = 0; k < a.terms.size(); ++k) {
        CHECK(a.terms[k].mean == b.terms[k].mean);
        CHECK(a.terms[k].std_error == b.terms[k].std_error);
    }
}

TEST_CASE("extending the series tail moves the total by less than its bar", "[s3_driver]") {
    S3Config cfg = base_config();
    cfg.quadrature.samples = 200000;
    cfg.series_length = 15;
    const SensitivityReport r15 = run_s3(cfg);
    cfg.series_length = 25;
    const SensitivityReport r25 = run_s3(cfg);
    CHECK(std::abs(r25.psi_total - r15.psi_total) <= r25.series_std_error);
}

TEST_CASE("the stream agrees with the windowed solves where both are converged",
          "[s3_driver]") {
    const VectorField X = fields::sinusoid(1.0, 1, 0, {0.0, 1.0});

    auto compare = [&](const MapModel& m, double tol) {
        S3Stream stream(m, X, seed_point(31));
        for (int i = 0; i < 220; ++i) stream.advance();
        const StreamSample& s = stream.current();

        const PointEvaluator pe(m, X);
        const PointData d = pe.at(s.p);

        const double flip = (dot(s.xu, d.xu) >= 0.0) ? 1.0 : -1.0;
        CHECK(norm(s.xu - d.xu * flip) < tol);
        CHECK(std::abs(s.h - d.h) < tol);
        CHECK(norm(s.curv - d.curv) < tol);
        CHECK(std::abs(s.xu_h - d.xu_h * flip) < tol);
        CHECK(norm(s.V - d.V) < tol);
        CHECK(norm(s.Y - d.Y) < tol);
        CHECK(std::abs(s.a - d.a * flip) < tol);
        CHECK(std::abs(s.xu_a - d.xu_a) < tol);
        CHECK(std::abs(s.rho0 - d.rho0 * flip) < tol);
        CHECK(std::abs(s.rho - d.rho) < tol);
    };

    compare(cat_map(), 1e-12);
    compare(perturbed_cat_map(0.02, fields::sinusoid(1.0, 1, 0, {0.0, 1.0})), 1e-9);
}

TEST_CASE("the finite-difference oracle brackets the known zero response", "[s3_driver]") {
    S3Config cfg = base_config();
    cfg.field.wave_x = 1;
    cfg.field.wave_y = 0;
    cfg.observable.wave_x = 1;
    cfg.observable.wave_y = 0;
    cfg.oracle.orbit_length = 200000;
    cfg.oracle.n_seeds = 4;

    const FDOracleResult res = fd_oracle(cfg);
    REQUIRE(res.per_seed.size() == 4);
    CHECK(res.std_error > 0.0);
    CHECK(std::abs(res.estimate) <= 4.0 * res.std_error);

    // regression pin: the oracle is deterministic given config and seeds
    const FDOracleResult again = fd_oracle(cfg, 4);
    CHECK(res.estimate == again.estimate);
    CHECK(res.std_error == again.std_error);
    CHECK(res.estimate == -0.59242388600539619);
}

TEST_CASE("the self-check battery passes and designed failures trip it", "[s3_driver]") {
    S3Config cfg = base_config();
    cfg.validation.orbit_length = 20000;

    const ValidationReport ok = validate(cfg);
    CAPTURE(ok.checks.size());
    for (const CheckResult& c : ok.checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.pass);
    }
    CHECK(ok.all_pass);

    SECTION("a truncation window of three cannot meet the residual tolerance") {
        S3Config bad = cfg;
        bad.windows.n_o2 = 3;
        const ValidationReport rep = validate(bad);
        CHECK_FALSE(rep.all_pass);
        bool found = false;
        for (const CheckResult& c : rep.checks)
            if (c.name == "decomposition_residual") {
                found = true;
                CHECK_FALSE(c.pass);
                CHECK(c.value > 1e-4);  // the truncation tail is visible, not rounding
            }
        CHECK(found);
    }

    SECTION("an impossible residual tolerance is reported, not clamped") {
        S3Config bad = cfg;
        bad.validation.residual_tol = 1e-30;
        const ValidationReport rep = validate(bad);
        CHECK_FALSE(rep.all_pass);
        for (const CheckResult& c : rep.checks)
            if (c.name == "decomposition_residual") CHECK_FALSE(c.pass);
    }
}

TEST_CASE("deterministic quadrature reproduces the closed-form response", "[s3_driver]") {
    // the effective push for series term k is n_push + k, so the node budget
    // bounds the series length the curve can resolve; keep the tail short and
    // lean on the fast correlation decay of this pair
    S3Config cfg = base_config();
    cfg.quadrature.method = "deterministic";
    cfg.quadrature.nodes = 4096;
    cfg.quadrature.n_push = 6;
    cfg.quadrature.base = {0.123, 0.456};
    cfg.quadrature.direction = {0.8506508083520399, 0.5257311121191336};
    cfg.series_length = 4;

    const SensitivityReport rep = run_s3(cfg);
    CHECK(rep.method == "deterministic");
    CHECK(rep.n_push == 6);
    CHECK(std::abs(rep.psi_total + std::numbers::pi) < 0.01);
    CHECK(rep.psi_total == resummed_total(rep));

    SECTION("the node fan-out is invariant under the worker count") {
        const SensitivityReport rep4 = run_s3(cfg, 4);
        CHECK(rep4.psi_total == rep.psi_total);
        CHECK(rep4.coboundary.mean == rep.coboundary.mean);
        for (std::size_t k = 0; k < rep.terms.size(); ++k)
            CHECK(rep4.terms[k].mean == rep.terms[k].mean);
    }

    SECTION("the push count is balanced from measured stretch when unset") {
        cfg.quadrature.n_push = -1;
        cfg.quadrature.nodes = 1024;
        const SensitivityReport rep_auto = run_s3(cfg);
        CHECK(rep_auto.n_push >= 3);
        CHECK(rep_auto.n_push <= 6);
        CHECK(std::abs(rep_auto.psi_total + std::numbers::pi) < 0.05);
    }
}

TEST_CASE("configs parse strictly, echo fully, and round-trip", "[s3_driver]") {
    const S3Config cfg = base_config();
    const nlohmann::json echoed = echo_config(cfg);
    const S3Config back = parse_config(echoed);
    CHECK(echo_config(back) == echoed);
    CHECK(back.seed == cfg.seed);
    CHECK(back.quadrature.samples == cfg.quadrature.samples);
    CHECK(back.field.type == "sinusoid");

    SECTION("missing keys are named") {
        CHECK_THROWS_WITH(parse_config(nlohmann::json::object()),
                          Catch::Matchers::ContainsSubstring("\"map\""));
        nlohmann::json j = echoed;
        j["map"].erase("family");
        CHECK_THROWS_WITH(parse_config(j), Catch::Matchers::ContainsSubstring("map.family"));
        j = echoed;
        j["field"].erase("direction");
        CHECK_THROWS_WITH(parse_config(j),
                          Catch::Matchers::ContainsSubstring("field.direction"));
    }

    SECTION("unknown selections are rejected") {
        nlohmann::json j = echoed;
        j["map"]["family"] = "hyperbolic_plane";
        CHECK_THROWS_AS(parse_config(j), ConfigError);
        j = echoed;
        j["quadrature"]["method"] = "simpson";
        CHECK_THROWS_AS(parse_config(j), ConfigError);
        j = echoed;
        j["windows"]["n_o2"] = 0;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
}
