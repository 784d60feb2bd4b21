// varinv: command-line front end.
//
//   varinv invert --config cfg.json --out DIR [--seed N] [--quiet]
//   varinv audit  --config cfg.json --x1 a,b --x2 c,d
//   varinv probe  --config cfg.json
//   varinv mpass  --config cfg.json [--anchor-a ..] [--anchor-b ..]
//   varinv demo   section2-scalar | section2-planar | section3-hammerstein

#include <iostream>

#include "CLI11.hpp"
#include "varinv/app/commands.hpp"

using namespace varinv;
using namespace varinv::app;

namespace {

std::optional<Vector> from_flag(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational inversion of nonlinear operators"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  std::vector<double> x1, x2, anchor_a, anchor_b;
  std::string demo_name;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "problem configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "overrides every seed in the config");
    sub->add_flag("--quiet", quiet, "no summary on standard output");
  };
  CLI::App* inv = app.add_subcommand("invert", "solve F(x) = y");
  common(inv);
  CLI::App* aud = app.add_subcommand("audit", "injectivity audit of a pair x1, x2");
  common(aud);
  aud->add_option("--x1", x1, "first point (comma separated)")->delimiter(',');
  aud->add_option("--x2", x2, "second point (comma separated)")->delimiter(',');
  CLI::App* prb = app.add_subcommand("probe", "coercivity and Palais-Smale probes");
  common(prb);
  CLI::App* mp = app.add_subcommand("mpass", "mountain-pass critical point");
  common(mp);
  mp->add_option("--anchor-a", anchor_a, "first anchor (comma separated)")->delimiter(',');
  mp->add_option("--anchor-b", anchor_b, "second anchor (comma separated)")->delimiter(',');
  mp->add_option("--x1", x1, "collision point x1 for the injectivity functional")->delimiter(',');
  mp->add_option("--x2", x2, "collision point x2 for the injectivity functional")->delimiter(',');
  CLI::App* demo = app.add_subcommand("demo", "built-in reproductions");
  demo->add_option("name", demo_name, "section2-scalar | section2-planar | section3-hammerstein")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kError;
  }

  if (demo->parsed()) return guarded([&] { return cmd_demo(demo_name, std::cout); }, std::cerr);

  return guarded(
      [&] {
        AppConfig cfg = load_config(config_path);
        if (seed) override_seed(cfg, *seed);
        if (aud->parsed()) {
          if (auto v = from_flag(x1)) cfg.x1 = v;
          if (auto v = from_flag(x2)) cfg.x2 = v;
        }
        if (mp->parsed()) {
          if (auto v = from_flag(anchor_a)) cfg.anchor_a = v;
          if (auto v = from_flag(anchor_b)) cfg.anchor_b = v;
          if (auto v = from_flag(x1)) cfg.mpass_x1 = v;
          if (auto v = from_flag(x2)) cfg.mpass_x2 = v;
        }
        RunContext ctx;
        ctx.out_dir = out_dir;
        ctx.log = quiet ? nullptr : &std::cout;
        if (inv->parsed()) return cmd_invert(cfg, ctx);
        if (aud->parsed()) return cmd_audit(cfg, ctx);
        if (prb->parsed()) return cmd_probe(cfg, ctx);
        return cmd_mpass(cfg, ctx);
      },
      std::cerr);
}
