#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "vaebench/autodiff.hpp"
#include "vaebench/checkpoint.hpp"
#include "vaebench/config.hpp"
#include "vaebench/errors.hpp"
#include "vaebench/mlp.hpp"
#include "vaebench/optim.hpp"
#include "vaebench/oracles.hpp"
#include "vaebench/selftest.hpp"

using namespace vaebench;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("vaebench_test_" + name)).string();
}

}  // namespace

TEST_CASE("matmul, relu and sigmoid on fixed inputs") {
  Tape tape;
  Var a = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  Var i = tape.constant(Tensor::identity(2));
  CHECK(matmul(a, i).value() == Tensor::matrix({{1, 2}, {3, 4}}));
  CHECK(relu(tape.constant(Tensor::vector({-1, 0, 2}))).value() == Tensor::vector({0, 0, 2}));
  CHECK(sigmoid(tape.constant(Tensor::scalar(0.0))).item() == 0.5);
}

TEST_CASE("shape mismatch names both shapes") {
  Tape tape;
  Var a = tape.constant(Tensor(Shape{2, 3}));
  Var b = tape.constant(Tensor(Shape{2, 2}));
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[2,2]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, b), DimensionError);
}

TEST_CASE("hand-derived gradients") {
  SUBCASE("d(w^2)/dw = 2w") {
    Parameter w("w", Tensor::vector({3.0}));
    Tape tape;
    tape.backward(sum(square(tape.param(w))));
    CHECK(w.grad[0] == doctest::Approx(6.0));
  }
  SUBCASE("sigmoid slope at zero is 1/4") {
    Parameter w("w", Tensor::scalar(0.0));
    Tape tape;
    Var x = tape.constant(Tensor::scalar(1.0));
    tape.backward(sigmoid(mul(tape.param(w), x)));
    CHECK(w.grad[0] == doctest::Approx(0.25));
  }
  SUBCASE("backward of sum yields ones") {
    Tape tape;
    Var x = tape.leaf(Tensor(Shape{3, 4}, 2.5));
    const auto g = tape.backward(sum(x));
    CHECK(g.at(x.id()) == Tensor::ones({3, 4}));
  }
}

TEST_CASE("non-scalar loss is rejected") {
  Tape tape;
  Var x = tape.leaf(Tensor(Shape{3}));
  CHECK_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("random three-layer MLP matches central differences") {
  Rng rng(42);
  Mlp mlp("net", {6, 9, 7, 4}, rng);
  Tensor x(Shape{5, 6});
  for (double& v : x.data()) v = rng.normal();
  Tensor target(Shape{5, 4});
  for (double& v : target.data()) v = rng.normal();
  auto params = mlp.parameters();
  const auto r = check_parameter_gradients(
      [&](Tape& t) { return mean(square(sub(mlp.forward(t, t.constant(x)), t.constant(target)))); }, params, 1e-6, 0);
  CHECK(r.coordinates == 6 * 9 + 9 + 9 * 7 + 7 + 7 * 4 + 4);
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("every differentiable op passes the finite-difference oracle") {
  for (const auto& c : gradient_checks()) {
    INFO(c.name << " " << c.detail);
    CHECK(c.passed);
  }
}

TEST_CASE("tape replay is deterministic") {
  auto run = [] {
    Rng rng(9, "init");
    Mlp mlp("net", {4, 8, 1}, rng);
    Adam adam({{mlp.parameters(), 1e-2}});
    Tensor x(Shape{16, 4});
    Rng data(9, "data");
    for (double& v : x.data()) v = data.normal();
    std::vector<double> losses;
    for (int step = 0; step < 20; ++step) {
      Tape tape;
      Var loss = mean(square(mlp.forward(tape, tape.constant(x))));
      losses.push_back(loss.item());
      adam.zero_grad();
      tape.backward(loss);
      adam.step();
    }
    return losses;
  };
  CHECK(run() == run());
}

TEST_CASE("optimizers") {
  SUBCASE("sgd step") {
    Parameter w("w", Tensor::vector({1.0}));
    w.grad = Tensor::vector({2.0});
    Parameter* ps[] = {&w};
    sgd_step(ps, 0.1);
    CHECK(w.value[0] == doctest::Approx(0.8));
  }
  SUBCASE("first Adam step is bounded by lr") {
    Rng rng(3);
    Parameter w("w", Tensor(Shape{50}));
    w.grad = Tensor(Shape{50});
    for (double& g : w.grad.data()) g = rng.normal() * 100.0;
    Adam adam({{{&w}, 1e-3}});
    adam.step();
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(std::abs(w.value[i]) <= 1e-3 * (1.0 + 1e-6));
      CHECK(w.value[i] * w.grad[i] < 0.0);
    }
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Parameter w("w", Tensor::vector({1.5, -2.0}));
    w.zero_grad();
    Adam adam({{{&w}, 0.1}});
    adam.step();
    CHECK(w.value == Tensor::vector({1.5, -2.0}));
    Sgd sgd({{{&w}, 0.1}});
    sgd.step();
    CHECK(w.value == Tensor::vector({1.5, -2.0}));
  }
  SUBCASE("missing gradient is a contract error") {
    Parameter w("w", Tensor::vector({1.0}));
    Adam adam({{{&w}, 0.1}});
    CHECK_THROWS_AS(adam.step(), ContractError);
    Parameter* ps[] = {&w};
    CHECK_THROWS_AS(sgd_step(ps, 0.1), ContractError);
  }
  SUBCASE("row-sparse parameters move only touched rows") {
    Parameter table("t", Tensor(Shape{4, 2}, 1.0));
    table.sparse_rows = true;
    table.zero_grad();
    table.grad.at(2, 0) = 0.5;
    Adam adam({{{&table}, 0.1}});
    adam.step();
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 2; ++c) {
        if (r == 2 && c == 0) CHECK(table.value.at(r, c) < 1.0);
        else CHECK(table.value.at(r, c) == 1.0);
      }
  }
}

TEST_CASE("checkpoint container") {
  Parameter a("layer.weight", Tensor::matrix({{1, 2, 3}, {4, 5, 6}}));
  Parameter b("layer.bias", Tensor::vector({-0.5, 0.25}));
  Parameter* ps[] = {&a, &b};
  const std::string path = temp_path("ckpt.bin");
  save_checkpoint(path, ps);

  Parameter a2("layer.weight", Tensor(Shape{2, 3}));
  Parameter b2("layer.bias", Tensor(Shape{2}));
  Parameter* qs[] = {&a2, &b2};
  load_checkpoint_into(path, qs);
  CHECK(a2.value == a.value);
  CHECK(b2.value == b.value);

  Parameter wrong("layer.bias", Tensor(Shape{3}));
  Parameter* ws[] = {&wrong};
  CHECK_THROWS_AS(load_checkpoint_into(path, ws), DimensionError);
  Parameter missing("other", Tensor(Shape{1}));
  Parameter* ms[] = {&missing};
  CHECK_THROWS_AS(load_checkpoint_into(path, ms), LookupError);

  const std::vector<NamedTensor> tensors{{"x", Tensor::vector({1, 2})}};
  auto bytes = encode_checkpoint(tensors);
  auto bad = bytes;
  bad[0] = 'X';
  try {
    decode_checkpoint(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
  bytes.pop_back();
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("key-value config") {
  KeyValues kv = KeyValues::parse("# comment\nepochs = 5\nlr = 0.001\nname = base run\n");
  CHECK(kv.get_uint("epochs", 0) == 5);
  CHECK(kv.get_double("lr", 0) == 0.001);
  CHECK(kv.get_string("name", "") == "base run");
  kv.apply_overrides({"epochs=7"});
  CHECK(kv.get_uint("epochs", 0) == 7);
  CHECK_THROWS_AS(kv.require_known({"epochs", "lr"}), ConfigError);
  kv.set("flag", "maybe");
  CHECK_THROWS_AS(kv.get_bool("flag", false), ConfigError);
  kv.set("epochs", "-3");
  CHECK_THROWS_AS(kv.get_uint("epochs", 0), ConfigError);
  CHECK_THROWS_AS(kv.apply_overrides({"novalue"}), ConfigError);
  CHECK(KeyValues::parse(kv.to_text()).entries() == kv.entries());
  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}
