#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "fixtures.hpp"

using namespace replan;

namespace {

const char* const kDirectional[] = {"Move a little to the left", "Move a little to the right", "Move much more to the left",
                                    "Move it a bit to the right"};

}  // namespace

TEST(InternalCheck, RejectsEveryNonMember) {
  const auto s = fixtures::default_workcell();
  const auto obs = fixtures::clean_view(s);
  const auto set = generate_grasp_candidates(s, "frame_a", Arm::Left, {0.05, 3});
  const auto instr = parse_instruction("Move a little to the left");
  RngStream rng(17);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789_@+-.";
  for (int i = 0; i < 2000; ++i) {
    std::string id;
    const int len = 1 + static_cast<int>(rng.next() % 20);
    for (int k = 0; k < len; ++k) id.push_back(alphabet[rng.next() % alphabet.size()]);
    if (set.contains(id)) continue;
    const auto v = internal_check(obs, {id, "", false}, instr, set);
    ASSERT_FALSE(v.accepted()) << id;
    EXPECT_EQ(v.rejection->kind, FeedbackKind::Logic);
    EXPECT_EQ(v.rejection->message.rfind("LOGIC: ", 0), 0u);
    EXPECT_EQ(v.rejection->subject_id, id);
  }
  // The current grasp is not a selectable candidate.
  EXPECT_FALSE(internal_check(obs, {set.current->id, "", false}, instr, set).accepted());
}

TEST(InternalCheck, MirroredCandidatesAreMutuallyExclusive) {
  const auto s = fixtures::default_workcell();
  const auto obs = fixtures::clean_view(s);
  for (int count : {1, 2, 3, 4}) {
    const auto set = generate_grasp_candidates(s, "frame_a", Arm::Left, {0.05, count});
    for (const char* text : kDirectional) {
      const auto instr = parse_instruction(text);
      for (const auto& c : set.candidates) {
        const auto mirror = detail::mirror_of(set, c.id);
        ASSERT_TRUE(mirror);
        const bool a = internal_check(obs, {c.id, "", false}, instr, set).accepted();
        const bool b = internal_check(obs, {*mirror, "", false}, instr, set).accepted();
        EXPECT_NE(a, b) << text << " " << c.id;
      }
    }
  }
}

TEST(InternalCheck, ComparativeSizeOrdering) {
  auto s = fixtures::default_workcell();
  s = apply_action(s, fixtures::pickup(Arm::Right, 3));
  const auto obs = fixtures::clean_view(s);
  const auto set = generate_tool_candidates(s);
  const auto bigger = parse_instruction("Take a bigger one");
  const auto smaller = parse_instruction("Take a smaller one");
  for (const auto& c : set.candidates) {
    const double size = c.tool()->tool.bit_size_mm;
    EXPECT_EQ(internal_check(obs, {c.id, "", false}, bigger, set).accepted(), size > 3.0) << c.id;
    EXPECT_EQ(internal_check(obs, {c.id, "", false}, smaller, set).accepted(), size < 3.0) << c.id;
  }
}

TEST(InternalCheck, NonDirectionalMembersAccepted) {
  const auto s = fixtures::default_workcell();
  const auto obs = fixtures::clean_view(s);
  const auto set = generate_tool_candidates(s);
  for (const auto& c : set.candidates) {
    EXPECT_TRUE(internal_check(obs, {c.id, "", false}, parse_instruction("Take a hex driver"), set).accepted());
  }
}

TEST(ExpectedDelta, FollowsTargetKind) {
  const auto s = fixtures::default_workcell();
  const auto grasps = generate_grasp_candidates(s, "frame_a", Arm::Left, {0.04, 2});
  const auto e = expected_delta_for(parse_instruction("Move left"), {"frame_a@+340.0", "", false}, grasps);
  const auto* move = std::get_if<GripperMove>(&e);
  ASSERT_NE(move, nullptr);
  EXPECT_DOUBLE_EQ(move->min_displacement_m, 0.02);
  EXPECT_TRUE(move->direction == (Vec3{1, 0, 0}));
  const auto tools = generate_tool_candidates(s);
  const auto t = expected_delta_for(parse_instruction("hex"), {"tool_2", "", false}, tools);
  ASSERT_NE(std::get_if<ToolAcquired>(&t), nullptr);
  EXPECT_EQ(std::get<ToolAcquired>(t).tool_name, "hex_2.5mm");
  const auto none = expected_delta_for(parse_instruction("hex"), {"zzz", "", false}, tools);
  EXPECT_NE(std::get_if<NoExpectation>(&none), nullptr);
}

TEST(ExternalCheck, FrozenAndPartialMotionRejected) {
  const auto s0 = fixtures::default_workcell();
  const auto set = generate_grasp_candidates(s0, "frame_a", Arm::Left, {0.05, 2});
  const auto instr = parse_instruction("Move a little to the left");
  const Selection sel{"frame_a@+350.0", "", false};
  const auto s1 = apply_action(s0, make_action(sel, set, s0, Arm::Left));
  const auto pre = fixtures::clean_view(s0);
  EXPECT_TRUE(external_check(pre, fixtures::clean_view(s1), instr, expected_delta_for(instr, sel, set)).accepted());

  RngStream rng(1);
  const auto frozen = observe(s1, NoiseModel{1.0, 0.0}, rng);
  const auto v = external_check(pre, frozen, instr, expected_delta_for(instr, sel, set), sel.target_id);
  ASSERT_FALSE(v.accepted());
  EXPECT_EQ(v.rejection->kind, FeedbackKind::Physical);
  EXPECT_EQ(v.rejection->message.rfind("PHYS: ", 0), 0u);
  EXPECT_EQ(v.rejection->subject_id, sel.target_id);

  // Motion smaller than half a lattice step is not enough.
  auto partial = s1;
  partial.grippers[0].pose.position = s0.grippers[0].pose.position + Vec3{0.02, 0, 0};
  EXPECT_FALSE(external_check(pre, fixtures::clean_view(partial), instr, GripperMove{Arm::Left, {1, 0, 0}, 0.025})
                   .accepted());
}

TEST(ExternalCheck, InvisibleToolRejected) {
  const auto s0 = fixtures::default_workcell();
  const auto set = generate_tool_candidates(s0);
  const auto instr = parse_instruction("Take a hex driver");
  const Selection sel{"tool_1", "", false};
  const auto s1 = apply_action(s0, make_action(sel, set, s0, Arm::Right));
  RngStream rng(2);
  const auto post = observe(s1, NoiseModel{0.0, 1.0}, rng);
  EXPECT_FALSE(external_check(fixtures::clean_view(s0), post, instr, expected_delta_for(instr, sel, set)).accepted());
}

TEST(ExternalCheck, PureFunctionOfInputs) {
  const auto s0 = fixtures::default_workcell();
  const auto s1 = apply_action(s0, fixtures::pickup(Arm::Right, 4));
  const auto pre = fixtures::clean_view(s0);
  const auto post = fixtures::clean_view(s1);
  const auto instr = parse_instruction("Take a hex driver");
  const ExpectedDelta e = ToolAcquired{"hex_4mm"};
  const auto first = to_json(external_check(pre, post, instr, e)).dump();
  for (int i = 0; i < 10; ++i) EXPECT_EQ(to_json(external_check(pre, post, instr, e)).dump(), first);
  EXPECT_FALSE(external_check(pre, post, instr, ToolAcquired{"hex_5mm"}).accepted());
}
