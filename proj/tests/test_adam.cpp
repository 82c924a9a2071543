#include <gtest/gtest.h>

#include "contratopic/adam.hpp"

namespace ct = contratopic;
using Mat = ct::diff::Matrix<double>;

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ct::diff::Parameter<double> p("p", Mat::Constant(2, 3, 0.75));
  ct::Adam<double> opt({0.1, 0.9, 0.999, 1e-8});
  std::vector<ct::diff::Parameter<double>*> params{&p};
  opt.step(params);
  EXPECT_TRUE(p.value == Mat::Constant(2, 3, 0.75));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Mat p = Mat::Zero(1, 1);
  Mat g = Mat::Ones(1, 1);
  ct::AdamMoments<double> st;
  ct::AdamConfig cfg;
  cfg.lr = 0.1;
  ct::adam_step(p, g, st, 1, cfg);
  EXPECT_NEAR(p(0, 0), -0.1, 1e-8);
}

TEST(Adam, ConvergesOnQuadratic) {
  // Running the recurrence independently at lr = 0.3 lands at 2.99119.
  ct::diff::Parameter<double> p("p", Mat::Zero(1, 1));
  ct::AdamConfig cfg;
  cfg.lr = 0.3;
  ct::Adam<double> opt(cfg);
  std::vector<ct::diff::Parameter<double>*> params{&p};
  for (int i = 0; i < 100; ++i) {
    p.grad(0, 0) = 2.0 * (p.value(0, 0) - 3.0);
    opt.step(params);
  }
  EXPECT_NEAR(p.value(0, 0), 3.0, 1e-2);
  EXPECT_NEAR(p.value(0, 0), 2.99118997160107, 1e-9);
  EXPECT_EQ(opt.step_count(), 100u);
}

TEST(Adam, ShapeMismatchIsFatal) {
  Mat p = Mat::Zero(2, 2);
  Mat g = Mat::Zero(2, 3);
  ct::AdamMoments<double> st;
  EXPECT_THROW(ct::adam_step(p, g, st, 1, ct::AdamConfig{}), ct::ShapeError);
}

TEST(Adam, FrozenParametersAreSkipped) {
  ct::diff::Parameter<double> p("p", Mat::Ones(1, 2), false);
  p.grad.setConstant(5.0);
  ct::Adam<double> opt;
  std::vector<ct::diff::Parameter<double>*> params{&p};
  opt.step(params);
  EXPECT_TRUE(p.value == Mat::Ones(1, 2));
}

TEST(Adam, DeterministicTrajectory) {
  auto run = [] {
    ct::diff::Parameter<double> p("p", Mat::Constant(1, 3, 0.2));
    ct::Adam<double> opt;
    std::vector<ct::diff::Parameter<double>*> params{&p};
    for (int i = 0; i < 20; ++i) {
      p.grad = p.value.array().sin().matrix();
      opt.step(params);
    }
    return p.value;
  };
  EXPECT_TRUE(run() == run());
}
