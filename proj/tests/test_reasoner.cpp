#include <gtest/gtest.h>

#include <string>

#include "fixtures.hpp"

using namespace replan;

namespace {

struct Fixture {
  WorkcellState state = fixtures::default_workcell();
  CandidateSet grasps = generate_grasp_candidates(state, "frame_a", Arm::Left, {0.05, 2});
  Observation obs = fixtures::clean_view(state);
};

Selection pick(const std::string& text, const CandidateSet& set, const Observation& obs,
               const std::vector<std::string>& excluded = {}) {
  ReasoningContext ctx(parse_instruction(text));
  for (const auto& id : excluded) ctx.append({FeedbackKind::Logic, "LOGIC: no", 0, id});
  return oracle_select(obs, ctx, set);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ConfigError;
}

}  // namespace

TEST(Oracle, DirectionalPicksNearestCandidateAlongDirection) {
  Fixture f;
  EXPECT_EQ(pick("Move a little more to the left", f.grasps, f.obs).target_id, "frame_a@+350.0");
  EXPECT_EQ(pick("Move a little to the right", f.grasps, f.obs).target_id, "frame_a@+250.0");
  EXPECT_EQ(pick("Move much more to the left", f.grasps, f.obs).target_id, "frame_a@+400.0");
  EXPECT_EQ(pick("Move much more to the right", f.grasps, f.obs).target_id, "frame_a@+200.0");
}

TEST(Oracle, ExcludesIdsNamedByFeedback) {
  Fixture f;
  EXPECT_EQ(pick("Move a little to the left", f.grasps, f.obs, {"frame_a@+350.0"}).target_id, "frame_a@+400.0");
  EXPECT_EQ(code_of([&] { pick("Move left", f.grasps, f.obs, {"frame_a@+350.0", "frame_a@+400.0"}); }),
            ErrorCode::NoFeasibleTarget);
}

TEST(Oracle, DirectionOffFrameAxisIsInfeasible) {
  Fixture f;
  EXPECT_EQ(code_of([&] { pick("Move it up", f.grasps, f.obs); }), ErrorCode::NoFeasibleTarget);
  const auto vertical = generate_grasp_candidates(f.state, "frame_b", Arm::Left, {0.05, 2});
  EXPECT_EQ(pick("Raise it a bit higher", vertical, f.obs).target_id.substr(0, 8), "frame_b@");
}

TEST(Oracle, ToolSelection) {
  Fixture f;
  auto tools = generate_tool_candidates(f.state);
  EXPECT_EQ(pick("Take a hex driver", tools, f.obs).target_id, "tool_1");
  EXPECT_EQ(pick("Take a phillips driver", tools, f.obs).target_id, "tool_6");
  EXPECT_EQ(pick("Take a screwdriver", tools, f.obs).target_id, "tool_1");
  EXPECT_EQ(code_of([&] { pick("Take a bigger one", tools, f.obs); }), ErrorCode::NoFeasibleTarget);

  auto held = apply_action(f.state, fixtures::pickup(Arm::Right, 3));
  tools = generate_tool_candidates(held);
  EXPECT_EQ(pick("Take a bigger one", tools, f.obs).target_id, "tool_4");
  EXPECT_EQ(pick("Take a smaller one", tools, f.obs).target_id, "tool_2");
  EXPECT_EQ(pick("Take a bigger one", tools, f.obs, {"tool_4"}).target_id, "tool_5");
}

TEST(Oracle, UnknownOrEmptyIsInfeasible) {
  Fixture f;
  EXPECT_EQ(code_of([&] { pick("sing a song", f.grasps, f.obs); }), ErrorCode::NoFeasibleTarget);
  EXPECT_EQ(code_of([&] { pick("Move left", CandidateSet{}, f.obs); }), ErrorCode::NoFeasibleTarget);
}

TEST(ReasoningContext, AppendOnlyAndExclusions) {
  ReasoningContext ctx(parse_instruction("Move left"));
  EXPECT_THROW(ctx.append({FeedbackKind::Logic, "", 0, "x"}), Error);
  ctx.append({FeedbackKind::Logic, "LOGIC: a", 1, "a"});
  ctx.append({FeedbackKind::Physical, "PHYS: b", 2, "b"});
  EXPECT_EQ(ctx.feedback().size(), 2u);
  EXPECT_EQ(ctx.excluded_ids(), (std::set<std::string>{"a", "b"}));
  const auto text = ctx.render();
  EXPECT_NE(text.find("Move left"), std::string::npos);
  EXPECT_LT(text.find("LOGIC: a"), text.find("PHYS: b"));
}

TEST(FaultInjector, ZeroProbabilitiesAreTransparent) {
  Fixture f;
  RngStream rng(3, "faults");
  ReasoningContext ctx(parse_instruction("Move a little to the left"));
  for (int i = 0; i < 100; ++i) {
    const auto s = faulty_select(oracle_select, FaultConfig{}, rng, f.obs, ctx, f.grasps);
    EXPECT_EQ(s.target_id, "frame_a@+350.0");
    EXPECT_FALSE(s.execution_fault);
  }
}

TEST(FaultInjector, CertainFaultsHaveTheirEffect) {
  Fixture f;
  ReasoningContext ctx(parse_instruction("Move a little to the left"));
  RngStream rng(4, "faults");
  for (int i = 0; i < 50; ++i) {
    const auto out = faulty_select(oracle_select, {1.0, 0.0, 0.0}, rng, f.obs, ctx, f.grasps);
    EXPECT_EQ(f.grasps.find(out.target_id), nullptr);
    EXPECT_EQ(out.target_id.rfind("target_", 0), 0u);
    const auto wrong = faulty_select(oracle_select, {0.0, 1.0, 0.0}, rng, f.obs, ctx, f.grasps);
    EXPECT_EQ(wrong.target_id, "frame_a@+250.0");
    const auto exec = faulty_select(oracle_select, {0.0, 0.0, 1.0}, rng, f.obs, ctx, f.grasps);
    EXPECT_EQ(exec.target_id, "frame_a@+350.0");
    EXPECT_TRUE(exec.execution_fault);
  }
  const auto tools = generate_tool_candidates(f.state);
  ReasoningContext tctx(parse_instruction("Take a hex driver"));
  const auto fab = faulty_select(oracle_select, {1.0, 0.0, 0.0}, rng, f.obs, tctx, tools);
  EXPECT_EQ(fab.target_id.rfind("tool_", 0), 0u);
  EXPECT_EQ(tools.find(fab.target_id), nullptr);
}

TEST(FaultInjector, ConsumesFourDrawsPerCall) {
  Fixture f;
  ReasoningContext ctx(parse_instruction("Move left"));
  for (const FaultConfig cfg : {FaultConfig{}, FaultConfig{1, 0, 0}, FaultConfig{0, 1, 1}, FaultConfig{0.5, 0.5, 0.5}}) {
    RngStream a(11);
    RngStream b(11);
    faulty_select(oracle_select, cfg, a, f.obs, ctx, f.grasps);
    for (int i = 0; i < 4; ++i) b.next();
    EXPECT_EQ(a.next(), b.next());
  }
}

TEST(FaultInjector, RatesMatchConfiguration) {
  Fixture f;
  ReasoningContext ctx(parse_instruction("Move a little to the left"));
  RngStream rng(8, "faults");
  const FaultConfig cfg{0.1, 0.2, 0.3};
  int out = 0, wrong = 0, exec = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto s = faulty_select(oracle_select, cfg, rng, f.obs, ctx, f.grasps);
    if (!f.grasps.find(s.target_id)) ++out;
    if (s.target_id == "frame_a@+250.0") ++wrong;
    if (s.execution_fault) ++exec;
  }
  EXPECT_NEAR(out / double(n), 0.1, 0.02);
  EXPECT_NEAR(wrong / double(n), 0.9 * 0.2, 0.02);
  EXPECT_NEAR(exec / double(n), 0.3, 0.02);
}

TEST(FaultyReasoner, SameSeedSameSequence) {
  Fixture f;
  ReasoningContext ctx(parse_instruction("Move a little to the left"));
  FaultyReasoner a(std::make_unique<OracleReasoner>(), {0.3, 0.3, 0.3}, RngStream(5, "faults"));
  FaultyReasoner b(std::make_unique<OracleReasoner>(), {0.3, 0.3, 0.3}, RngStream(5, "faults"));
  for (int i = 0; i < 100; ++i) {
    const auto x = a.select(f.obs, ctx, f.grasps);
    const auto y = b.select(f.obs, ctx, f.grasps);
    EXPECT_EQ(x.target_id, y.target_id);
    EXPECT_EQ(x.execution_fault, y.execution_fault);
  }
  EXPECT_EQ(a.name(), "faulty(oracle)");
}
