#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pseudosimple/dynamics.hpp"
#include "pseudosimple/planar_d3.hpp"
#include "support.hpp"

using namespace ps;

namespace {

const VectorFieldSpec& d3_spec() {
  static const VectorFieldSpec s = VectorFieldSpec::d3(CoeffsD3::reference_periodic());
  return s;
}

const CycleGeometry& d3_geo() {
  static const CycleGeometry g = compute_connections(d3_spec());
  return g;
}

const VectorFieldSpec& gl_spec() {
  static const VectorFieldSpec s = VectorFieldSpec::gl23(GLParametrization{0.8, 0.001});
  return s;
}

const CycleGeometry& gl_geo() {
  static const CycleGeometry g = compute_connections(gl_spec());
  return g;
}

IntegratorConfig tight(double T) { return {1e-11, 1e-14, 0.0, T, 1e-3, true}; }

// Random unit vector of a subspace.
Vec4 in_subspace(const LinearSubspace& s, gen::Rng& rng) {
  const Eigen::MatrixXd B = s.basis_matrix();
  Eigen::VectorXd c(B.cols());
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = rng.normal();
  Vec4 v = B * c;
  return v.normalized();
}

}  // namespace

// ---------------------------------------------------------------------------
// Integration

TEST(Integrate, AxisTrajectoryStaysOnAxisAndConverges) {
  const Vec4 xi1 = d3_geo().base[0].position;
  const Vec4 u = xi1.normalized();
  IntegrateOptions opt;
  opt.converge_tol = 1e-12;
  const TrajectoryRecord rec = integrate(d3_spec(), Eigen::VectorXd(0.3 * u), tight(1e4), opt);
  EXPECT_EQ(rec.reason, Termination::Converged);
  double off = 0;
  for (const auto& x : rec.x) off = std::max(off, (x - x.dot(u) * u).norm());
  EXPECT_LE(off, 1e-12);
  EXPECT_NEAR((rec.x.back() - xi1).norm(), 0.0, 1e-10);
}

TEST(Integrate, PlanarTrajectoryConservesFirstIntegral) {
  const PlanarParams p = PlanarParams::make(0.1, 1.0);
  const double r0 = 0.2, th0 = 0.5;
  IntegrateOptions opt;
  opt.escape_radius = 1.0;
  const TrajectoryRecord rec =
      integrate(VectorFieldSpec::planar(p), Eigen::Vector2d(r0 * std::cos(th0), r0 * std::sin(th0)), tight(1e3), opt);
  EXPECT_EQ(rec.reason, Termination::EscapeRadius);
  EXPECT_EQ(rec.dim, 2);
  const double c0 = conserved_quantity(p, {r0, th0});
  double drift = 0;
  for (const auto& x : rec.x) {
    const double r = std::hypot(x[0], x[1]), th = std::atan2(x[1], x[0]);
    drift = std::max(drift, std::abs(conserved_quantity(p, {r, th}) - c0));
  }
  EXPECT_LE(drift, 1e-6);
  // The run stops at the first step past the unit circle.
  const TransitResult tr = transit(p, r0, th0);
  ASSERT_GE(rec.t.size(), 2u);
  EXPECT_LT(rec.t[rec.t.size() - 2], tr.tau);
  EXPECT_GE(rec.t.back(), tr.tau);
}

TEST(Integrate, SamplesOnRequestedGrid) {
  IntegrateOptions opt;
  opt.sample_dt = 0.25;
  const TrajectoryRecord rec = integrate(d3_spec(), Eigen::VectorXd(Vec4(0.1, 0.05, 0.02, -0.03)), tight(10), opt);
  ASSERT_EQ(rec.t.size(), 41u);
  for (std::size_t i = 0; i < rec.t.size(); ++i) EXPECT_NEAR(rec.t[i], 0.25 * static_cast<double>(i), 1e-12);
  EXPECT_EQ(rec.reason, Termination::MaxTime);
}

TEST(Integrate, StopsAtEscapeRadius) {
  IntegrateOptions opt;
  opt.escape_radius = 0.1;
  const TrajectoryRecord rec = integrate(d3_spec(), Eigen::VectorXd(Vec4(0.01, 0.0, 0.0, 0.0)), tight(1e4), opt);
  EXPECT_EQ(rec.reason, Termination::EscapeRadius);
  EXPECT_GE(rec.x.back().norm(), 0.1);
}

TEST(Integrate, RejectsBadInput) {
  EXPECT_THROW(integrate(d3_spec(), Eigen::Vector2d(0.1, 0.1), tight(1)), DomainError);
  Eigen::VectorXd nan = Vec4(0.1, 0, 0, 0);
  nan[2] = std::nan("");
  EXPECT_THROW(integrate(d3_spec(), nan, tight(1)), DomainError);
  EXPECT_THROW(integrate(d3_spec(), Eigen::VectorXd(Vec4(0.1, 0, 0, 0)), IntegratorConfig{0.0, 1e-12, 0.0, 1.0, 1e-3, true}),
               DomainError);
}

// ---------------------------------------------------------------------------
// Flow symmetry

TEST(Flow, FieldIsTangentToConnectionPlanes) {
  gen::Rng rng(70);
  for (const CycleGeometry* geo : {&d3_geo(), &gl_geo()}) {
    const VectorFieldSpec& spec = geo == &d3_geo() ? d3_spec() : gl_spec();
    for (const auto& c : geo->connections)
      for (int n = 0; n < 20; ++n) {
        const Vec4 x = rng.uniform(0.05, 1.0) * in_subspace(c.plane, rng);
        const Vec4 f = eval_field(spec, Eigen::VectorXd(x));
        EXPECT_LE(c.plane.distance(f), 1e-14 * std::max(1.0, f.norm()));
      }
  }
}

// Transverse expansion amplifies rounding off the plane, so the horizon is short.
TEST(Flow, PreservesConnectionPlanes) {
  gen::Rng rng(71);
  for (const CycleGeometry* geo : {&d3_geo(), &gl_geo()}) {
    const VectorFieldSpec& spec = geo == &d3_geo() ? d3_spec() : gl_spec();
    for (std::size_t k = 0; k < geo->connections.size(); k += 3) {
      const LinearSubspace& plane = geo->connections[k].plane;
      const Vec4 x0 = 0.3 * in_subspace(plane, rng);
      IntegrateOptions opt;
      opt.sample_dt = 0.1;
      const TrajectoryRecord rec = integrate(spec, Eigen::VectorXd(x0), tight(10), opt);
      double worst = 0;
      for (const auto& x : rec.x) worst = std::max(worst, plane.distance(x));
      EXPECT_LE(worst, 1e-7) << family_name(spec.family()) << " connection " << k;
    }
  }
}

TEST(Flow, CommutesWithGroupAction) {
  gen::Rng rng(72);
  for (const VectorFieldSpec* spec : {&d3_spec(), &gl_spec()}) {
    const GroupTable& g = spec->group();
    for (int n = 0; n < 10; ++n) {
      const Vec4 x = 0.3 * rng.unit4();
      const auto& el = g.elements()[static_cast<std::size_t>(rng.integer(0, static_cast<int>(g.order()) - 1))];
      const Vec4 a = flow(*spec, el * x, 5.0, tight(5));
      const Vec4 b = el * flow(*spec, x, 5.0, tight(5));
      EXPECT_LE((a - b).norm(), 1e-8);
    }
  }
}

TEST(Flow, ZeroTimeIsIdentity) {
  const Vec4 x(0.1, 0.2, 0.3, 0.4);
  EXPECT_EQ(flow(d3_spec(), x, 0.0, tight(1)), x);
}

// ---------------------------------------------------------------------------
// Connections

TEST(Connections, D3CycleHasTwoEquilibriaAndEightConnections) {
  const CycleGeometry& geo = d3_geo();
  ASSERT_EQ(geo.equilibria.size(), 2u);
  int n1 = 0, n2 = 0;
  for (const auto& c : geo.connections) (c.type == 1 ? n1 : n2)++;
  EXPECT_EQ(n1, 2);
  EXPECT_EQ(n2, 6);
  EXPECT_EQ(geo.sections.size(), geo.connections.size());
}

TEST(Connections, GLCycleHasSixteenEquilibriaAndFortyConnections) {
  const CycleGeometry& geo = gl_geo();
  EXPECT_EQ(geo.equilibria.size(), 16u);
  int n1 = 0, n2 = 0;
  for (const auto& c : geo.connections) (c.type == 1 ? n1 : n2)++;
  EXPECT_EQ(n1, 16);
  EXPECT_EQ(n2, 24);
}

TEST(Connections, PolylinesJoinEquilibriaInsideTheirPlanes) {
  for (const CycleGeometry* geo : {&d3_geo(), &gl_geo()}) {
    for (const auto& c : geo->connections) {
      ASSERT_GE(c.points.size(), 2u);
      const Vec4& from = geo->equilibria[static_cast<std::size_t>(c.from)];
      const Vec4& to = geo->equilibria[static_cast<std::size_t>(c.to)];
      EXPECT_LE((c.points.front() - from).norm(), 1e-12);
      EXPECT_LE((c.points.back() - to).norm(), 1e-12);
      EXPECT_EQ(geo->equilibrium_type[static_cast<std::size_t>(c.from)], c.type);
      EXPECT_NE(geo->equilibrium_type[static_cast<std::size_t>(c.to)], c.type);
      for (const auto& x : c.points) EXPECT_LE(c.plane.distance(x), 1e-10);
      EXPECT_TRUE(c.plane.contains(from, 1e-10));
      EXPECT_TRUE(c.plane.contains(to, 1e-10));
    }
  }
}

TEST(Connections, EquilibriaAreZerosOfTheField) {
  for (const VectorFieldSpec* spec : {&d3_spec(), &gl_spec()}) {
    const CycleGeometry& geo = spec == &d3_spec() ? d3_geo() : gl_geo();
    for (const auto& e : geo.equilibria) EXPECT_LE(eval_field(*spec, Eigen::VectorXd(e)).norm(), 1e-10);
  }
}

TEST(Connections, ArclengthParametrizationIsConsistent) {
  const Polyline& c = d3_geo().connections.front();
  const auto [p0, t0] = c.at_arclength(0.0);
  const auto [p1, t1] = c.at_arclength(1.0);
  EXPECT_LE((p0 - c.points.front()).norm(), 1e-12);
  EXPECT_LE((p1 - c.points.back()).norm(), 1e-12);
  EXPECT_NEAR(t0.norm(), 1.0, 1e-12);
  EXPECT_NEAR(t1.norm(), 1.0, 1e-12);
  double len = 0;
  for (std::size_t i = 1; i < c.points.size(); ++i) len += (c.points[i] - c.points[i - 1]).norm();
  EXPECT_NEAR(c.length(), len, 1e-12);
}

TEST(DistanceToCycle, MatchesBruteForce) {
  gen::Rng rng(73);
  const CycleGeometry& geo = d3_geo();
  for (int n = 0; n < 40; ++n) {
    const auto& c = geo.connections[static_cast<std::size_t>(rng.integer(0, static_cast<int>(geo.connections.size()) - 1))];
    const Vec4 x = c.at_arclength(rng.uniform(0, 1)).first + rng.uniform(0, 0.3) * rng.unit4();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : geo.connections)
      for (std::size_t i = 1; i < p.points.size(); ++i) {
        const Vec4 a = p.points[i - 1], d = p.points[i] - a;
        const double s = std::clamp((x - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
        best = std::min(best, (x - a - s * d).norm());
      }
    EXPECT_NEAR(distance_to_cycle(x, geo), best, 1e-14);
  }
}

TEST(DistanceToCycle, ZeroOnTheCycle) {
  for (const auto& c : d3_geo().connections)
    for (std::size_t i = 0; i < c.points.size(); i += 97) EXPECT_LE(distance_to_cycle(c.points[i], d3_geo()), 1e-15);
}

// ---------------------------------------------------------------------------
// Classification

TEST(Classify, PeriodicOrbitReturnsAfterOnePeriod) {
  const CycleGeometry& geo = d3_geo();
  const Vec4 x0 = geo.base[1].position + Vec4(0, 0.01, 0.003, 0.002);
  const ClassificationVerdict v = classify_attractor(d3_spec(), x0, geo, ClassifyConfig{});
  ASSERT_EQ(v.kind, VerdictKind::PeriodicOrbit) << v.note;
  EXPECT_GT(v.period, 0);
  EXPECT_GT(v.crossings_per_period, 0);
  EXPECT_LT(v.max_dist, 0.5);
  const Vec4 back = flow(d3_spec(), v.orbit_point, v.period, tight(v.period));
  EXPECT_LE((back - v.orbit_point).norm(), 1e-5);
}

// The periodic orbit reaches about 0.007 from X, so a 0.005-tube is left.
TEST(Classify, LeavesTubeNarrowerThanAttractor) {
  const CycleGeometry& geo = d3_geo();
  const Vec4 x0 = geo.base[1].position + Vec4(0, 0.001, 0.0003, 0.0002);
  ASSERT_LT(distance_to_cycle(x0, geo), 0.005);
  ClassifyConfig cc;
  cc.delta_escape = 0.005;
  const ClassificationVerdict v = classify_attractor(d3_spec(), x0, geo, cc);
  EXPECT_EQ(v.kind, VerdictKind::EscapesNeighborhood);
  EXPECT_GT(v.escape_time, 0);
}

// ---------------------------------------------------------------------------
// Census

TEST(Census, SamplesLieInTubeAndOffInvariantSubspaces) {
  std::mt19937_64 rng(5);
  const CycleGeometry& geo = d3_geo();
  for (int n = 0; n < 200; ++n) {
    const Vec4 x = sample_tube(geo, 0.1, rng, false, 1e-6);
    EXPECT_LT(distance_to_cycle(x, geo), 0.1);
    EXPECT_FALSE(detail::on_invariant_subspace(*geo.group, x, 1e-6));
  }
}

TEST(Census, InvariantSubspaceDetection) {
  const CycleGeometry& geo = d3_geo();
  for (const auto& c : geo.connections) EXPECT_TRUE(detail::on_invariant_subspace(*geo.group, c.points[c.points.size() / 2], 1e-8));
  EXPECT_FALSE(detail::on_invariant_subspace(*geo.group, Vec4(0.1, 0.2, 0.3, 0.4), 1e-8));
}

TEST(Census, DeterministicAcrossThreadCounts) {
  CensusConfig cc;
  cc.samples = 4;
  cc.seed = 9;
  cc.max_time = 500;
  const CensusResult a = escape_census(d3_spec(), d3_geo(), cc);
  cc.threads = 2;
  const CensusResult b = escape_census(d3_spec(), d3_geo(), cc);
  ASSERT_EQ(a.samples.size(), 4u);
  ASSERT_EQ(b.samples.size(), 4u);
  EXPECT_EQ(a.escape_fraction, b.escape_fraction);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a.samples[i].x0, b.samples[i].x0);
    EXPECT_EQ(a.samples[i].escaped, b.samples[i].escaped);
    EXPECT_EQ(a.samples[i].exit_time, b.samples[i].exit_time);
    EXPECT_EQ(a.samples[i].final_distance, b.samples[i].final_distance);
  }
}

TEST(Census, EmptyCensusHasZeroFraction) {
  CensusConfig cc;
  cc.samples = 0;
  const CensusResult r = escape_census(d3_spec(), d3_geo(), cc);
  EXPECT_TRUE(r.samples.empty());
  EXPECT_EQ(r.escape_fraction, 0.0);
}

// ---------------------------------------------------------------------------
// Sweeps and worker pool

TEST(Sweep, EmptyGridGivesEmptyTable) {
  const auto rows = sweep({}, [](const std::map<std::string, double>&) { return std::pair{d3_spec(), Vec4(Vec4::Zero())}; },
                          ClassifyConfig{});
  EXPECT_TRUE(rows.empty());
}

TEST(Sweep, FailuresAreRecordedPerRow) {
  const std::vector<std::map<std::string, double>> grid{{{"h2", -1.0}}};
  const auto rows = sweep(grid,
                          [](const std::map<std::string, double>& p) {
                            return std::pair{VectorFieldSpec::gl23(GLParametrization{0.8, p.at("h2")}), Vec4(Vec4::Zero())};
                          },
                          ClassifyConfig{});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].verdict.has_value());
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_EQ(rows[0].params.at("h2"), -1.0);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (int threads : {1, 3}) {
    std::vector<int> hits(100, 0);
    detail::parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) EXPECT_EQ(h, 1);
  }
}
