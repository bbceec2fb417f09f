#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "jgn/binary_io.hpp"
#include "jgn/dataset.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
};

const fs::path& workdir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "jgn_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Result run(const std::string& args) {
    const auto out = workdir() / "stdout.txt";
    const std::string cmd = std::string(JGN_CLI_PATH) + " " + args + " > " + out.string() + " 2>" +
                            (workdir() / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string p(const std::string& name) { return (workdir() / name).string(); }

}  // namespace

TEST_CASE("synth writes the requested corpus") {
    REQUIRE(run("synth --out " + p("a.sgds") + " --pairs 8 --rate 0.5 --qf 75 --size 64 --seed 7").code == 0);
    auto ds = jgn::load_dataset(p("a.sgds"));
    CHECK(ds.pairs.size() == 8);
    CHECK(ds.h == 64);
    CHECK(ds.w == 64);
    REQUIRE(run("synth --out " + p("b.sgds") + " --pairs 8 --rate 0.5 --qf 75 --size 64 --seed 7").code == 0);
    CHECK(jgn::read_file(p("a.sgds")) == jgn::read_file(p("b.sgds")));
}

TEST_CASE("usage errors exit with 2 and write nothing") {
    CHECK(run("synth --out " + p("x.sgds") + " --bogus 1").code == 2);
    CHECK(run("synth --out " + p("x.sgds") + " --size 12").code == 2);
    CHECK(run("synth --out " + p("x.sgds") + " --rate 2").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("").code == 2);
    CHECK_FALSE(fs::exists(p("x.sgds")));
    CHECK(run("gradcheck --scope nowhere").code == 2);
    CHECK(run("train --data a --val b --out " + p("x.sgck") + " --log " + p("x.csv") + " --epochs 3").code == 2);
    CHECK(run("train --data a --val b --out " + p("x.sgck") + " --log " + p("x.csv") + " --ablation most").code == 2);
    CHECK_FALSE(fs::exists(p("x.sgck")));
    CHECK_FALSE(fs::exists(p("x.csv")));
}

TEST_CASE("runtime failures exit with 1 and write nothing") {
    CHECK(run("eval --data " + p("missing.sgds") + " --ckpt " + p("missing.sgck")).code == 1);
    std::ofstream(p("junk.sgds")) << "SGDX not a dataset";
    CHECK(run("train --data " + p("junk.sgds") + " --val " + p("junk.sgds") + " --out " + p("y.sgck") + " --log " +
              p("y.csv"))
              .code == 1);
    CHECK_FALSE(fs::exists(p("y.sgck")));
    CHECK_FALSE(fs::exists(p("y.csv")));
}

TEST_CASE("config files merge under flags") {
    {
        std::ofstream cfg(p("synth.cfg"));
        cfg << "# corpus\npairs = 3\nsize=16\n\nseed=2  # trailing\n";
    }
    REQUIRE(run("synth --config " + p("synth.cfg") + " --out " + p("c.sgds") + " --pairs 2").code == 0);
    auto ds = jgn::load_dataset(p("c.sgds"));
    CHECK(ds.pairs.size() == 2);
    CHECK(ds.h == 16);
    std::ofstream(p("bad.cfg")) << "colour=blue\n";
    CHECK(run("synth --config " + p("bad.cfg") + " --out " + p("d.sgds")).code == 2);
    CHECK_FALSE(fs::exists(p("d.sgds")));
}

TEST_CASE("train then eval") {
    REQUIRE(run("synth --out " + p("t.sgds") + " --pairs 2 --size 16 --seed 1").code == 0);
    REQUIRE(run("synth --out " + p("v.sgds") + " --pairs 2 --size 16 --seed 2").code == 0);
    const std::string train = "train --data " + p("t.sgds") + " --val " + p("v.sgds") +
                              " --epochs 2,1 --batch-pairs 1 --seed 3 --ablation no_gal";
    REQUIRE(run(train + " --out " + p("m1.sgck") + " --log " + p("m1.csv")).code == 0);
    REQUIRE(run(train + " --out " + p("m2.sgck") + " --log " + p("m2.csv")).code == 0);
    CHECK(jgn::read_file(p("m1.sgck")) == jgn::read_file(p("m2.sgck")));
    CHECK(jgn::read_file(p("m1.csv")) == jgn::read_file(p("m2.csv")));

    auto r = run("eval --data " + p("v.sgds") + " --ckpt " + p("m1.sgck"));
    REQUIRE(r.code == 0);
    double pe, pfa, pmd, acc;
    REQUIRE(std::sscanf(r.out.c_str(), "P_E=%lf P_FA=%lf P_MD=%lf ACC=%lf", &pe, &pfa, &pmd, &acc) == 4);
    CHECK(pe == doctest::Approx((pfa + pmd) / 2).epsilon(1e-3));
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);

    CHECK(run("eval --data " + p("t.sgds") + " --ckpt " + p("t.sgds")).code == 1);
}

TEST_CASE("gradcheck command") {
    auto r = run("gradcheck --scope gal");
    CHECK(r.code == 0);
    CHECK(r.out.find("gal.layer1.W") != std::string::npos);
    CHECK(r.out.find("max relative error") != std::string::npos);
    CHECK(run("gradcheck --scope gal --tolerance 0").code == 1);
}
