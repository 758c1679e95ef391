#include <doctest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "poiseuille/errors.hpp"
#include "poiseuille/experiments.hpp"

using namespace poiseuille;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("poiseuille_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("decay-rate fit") {
    std::vector<double> t, E;
    for (int i = 0; i <= 100; ++i) {
        t.push_back(0.1 * i);
        E.push_back(3.0 * std::exp(-0.2 * t.back()));
    }
    const RateFit f = fit_decay_rate(t, E);
    CHECK(std::abs(f.rate - 0.2) < 1e-10);
    CHECK(f.residual < 1e-10);
    CHECK(f.t_begin == doctest::Approx(1.0));
    CHECK(f.t_end == doctest::Approx(10.0));
    CHECK_FALSE(f.window_shrunk);

    const RateFit flat = fit_decay_rate(t, std::vector<double>(t.size(), 2.5));
    CHECK(std::abs(flat.rate) < 1e-12);

    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 1e-3);
    std::vector<double> En = E;
    for (double& e : En) e *= std::exp(noise(rng));
    CHECK(std::abs(fit_decay_rate(t, En).rate - 0.2) < 2e-3);

    CHECK_THROWS_AS(fit_decay_rate({0, 1, 2, 3, 4}, {1, 1, 1, 1, 1}), DomainError);

    std::vector<double> Eu = E;
    for (int i = 60; i <= 100; ++i) Eu[i] = 0.0;
    const RateFit s = fit_decay_rate(t, Eu);
    CHECK(s.window_shrunk);
    CHECK_FALSE(s.warning.empty());
    CHECK(s.t_end < 6.0);
    CHECK(std::abs(s.rate - 0.2) < 1e-10);

    CHECK(loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192}) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("CSV and SVG output") {
    const fs::path dir = scratch_dir("io");
    CsvTable t{{"t", "E"}, {{0.0, 1.0}, {0.1, 0.9048374180359595}, {0.2, 1.0 / 3.0}}};
    emit_csv(dir / "a.csv", t);
    std::ifstream in(dir / "a.csv");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 4);

    const CsvTable back = read_csv(dir / "a.csv");
    CHECK(back.header == t.header);
    REQUIRE(back.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(back.rows[i][j] - t.rows[i][j]) <= 1e-15);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    CsvTable r{{"x", "y", "z"}, {}};
    for (int i = 0; i < 50; ++i) r.rows.push_back({u(rng), std::exp(u(rng) / 10.0), 1e-300 * u(rng)});
    emit_csv(dir / "r.csv", r);
    const CsvTable rb = read_csv(dir / "r.csv");
    for (std::size_t i = 0; i < r.rows.size(); ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(rb.rows[i][j] == r.rows[i][j]);

    emit_svg(dir / "p.svg", "decay <k> & nu", "t", "E",
             {{"a", {0, 1, 2}, {1, 0.5, 0.25}}, {"b", {0, 1, 2}, {1, 0.0, 0.1}}});
    boost::property_tree::ptree pt;
    CHECK_NOTHROW(boost::property_tree::read_xml((dir / "p.svg").string(), pt));
    CHECK(pt.get_child_optional("svg").has_value());

    CHECK_THROWS_AS(emit_csv(dir / "a.csv" / "nested.csv", t), IoError);
    fs::remove_all(dir);
}

TEST_CASE("configuration") {
    for (const auto& kind : experiment_kinds()) {
        const RunConfig c = default_config(kind);
        CHECK_NOTHROW(c.validate());
        const RunConfig back = parse_config(serialize_config(c), kind);
        CHECK(serialize_config(back) == serialize_config(c));
    }
    CHECK_THROWS_AS(parse_config("{\"grid\": {\"n_y\": 64, \"bogus\": 1}}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"grid\": "), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"grid\": {\"n_y\": \"many\"}}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"physics\": {\"nu\": 1.5}}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"experiment\": {\"kind\": \"nope\"}}"), ConfigError);

    const RunConfig partial = parse_config("{\"grid\": {\"n_y\": 64}, \"time\": {\"dt\": null}}", "rate-sweep");
    CHECK(partial.n_y == 64);
    CHECK(partial.experiment.kind == "rate-sweep");
    CHECK_FALSE(partial.dt.has_value());

    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("parallel_for") {
    for (int workers : {1, 3, 8}) {
        std::vector<double> out(100);
        parallel_for(out.size(), workers, [&](std::size_t i) { out[i] = std::sqrt(double(i)); });
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == std::sqrt(double(i)));
    }
    CHECK_THROWS_AS(parallel_for(10, 2,
                                 [](std::size_t i) {
                                     if (i == 7) throw DomainError("seven");
                                 }),
                    DomainError);
}

TEST_CASE("seeded initial data") {
    CHECK(cell_seed(1, 2) == cell_seed(1, 2));
    CHECK(cell_seed(1, 2) != cell_seed(1, 3));
    CHECK(cell_seed(1, 2) != cell_seed(2, 2));

    const Grid1D g(10.0, 64);
    std::mt19937_64 a(5), b(5);
    const CVector wa = random_localized_state(2.0, g, a), wb = random_localized_state(2.0, g, b);
    CHECK(wa == wb);
    CHECK(std::abs(wa[0]) == 0.0);
    CHECK(std::abs(wa[g.size() - 1]) == 0.0);

    const KGrid kg(4.0, 0.25);
    const ModeBank bank(g, kg, 1e-2);
    const ConvolutionPlan plan(kg);
    ProfileConfig p;
    p.y_spread = 2.0;
    p.random_phase = true;
    const Field f1 = build_profile(p, bank, plan, 11), f2 = build_profile(p, bank, plan, 11);
    for (int j = 0; j < kg.size(); ++j) CHECK(f1.modes[j] == f2.modes[j]);
    CHECK(f1.reality_defect() == 0.0);
    for (int j = 0; j < kg.size(); ++j)
        if (!plan.retained(j)) CHECK(f1.modes[j].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run_experiment outputs and reproducibility") {
    RunConfig c = default_config("linear-decay");
    c.n_y = 32;
    c.T = 1.0;
    c.dt = 0.01;
    c.experiment.k_list = {1.0};
    c.experiment.nu_list = {1e-2};

    const fs::path d1 = scratch_dir("run1"), d2 = scratch_dir("run2");
    c.output_dir = d1.string();
    const RunManifest m1 = run_experiment(c, {2});
    c.output_dir = d2.string();
    const RunManifest m2 = run_experiment(c, {1});
    CHECK(m1.exit_code == kExitOk);
    CHECK(m2.exit_code == kExitOk);
    REQUIRE(!m1.files.empty());
    for (const auto& f : m1.files) {
        CHECK(fs::exists(d1 / f.path));
        if (f.kind == "csv") CHECK(slurp(d1 / f.path) == slurp(d2 / f.path));
    }
    const auto man = nlohmann::json::parse(slurp(d1 / "manifest.json"));
    CHECK(man.at("status") == "ok");
    CHECK(man.at("exit_code") == 0);
    CHECK(man.contains("config"));
    CHECK(man.contains("code_version"));

    SUBCASE("failures still leave a manifest") {
        RunConfig bad = c;
        bad.output_dir = scratch_dir("run3").string();
        bad.n_y = 16;
        bad.experiment.identity_tolerance = 1e-300;
        bad.experiment.kind = "verify-identities";
        bad.experiment.k_list = {1.0};
        bad.experiment.n_states = 2;
        const RunManifest m = run_experiment(bad, {1});
        CHECK(m.exit_code == kExitVerification);
        const auto j = nlohmann::json::parse(slurp(fs::path(bad.output_dir) / "manifest.json"));
        CHECK(j.at("status") == "failed");
        CHECK(j.at("exit_code") == 4);
        fs::remove_all(bad.output_dir);
    }
    SUBCASE("invalid configuration writes nothing") {
        RunConfig bad = c;
        bad.output_dir = (fs::temp_directory_path() / "poiseuille_test_invalid").string();
        fs::remove_all(bad.output_dir);
        bad.nu = 2.0;
        CHECK(run_experiment(bad, {1}).exit_code == kExitConfig);
        CHECK_FALSE(fs::exists(bad.output_dir));
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}
