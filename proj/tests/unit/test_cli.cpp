#include "tmpdir.hpp"

#include "msvg/dataio.hpp"
#include "msvg/selection.hpp"
#include "msvg/simgen.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

#ifdef MSVG_CLI_PATH

using namespace msvg;
using msvg_test::read_text;
using msvg_test::TempDir;

namespace {

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" MSVG_CLI_PATH "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::string& path) {
    return "\"" + path + "\"";
}

// A small two-sample dataset with one all-zero gene, written to `dir`.
std::string zero_gene_dataset(const TempDir& dir) {
    SimConfig c;
    c.n_samples = 2;
    c.grid_rows = c.grid_cols = 10;
    c.n_genes = 8;
    c.n_sv = 3;
    c.seed = 21;
    SimulatedData d = generate(c);
    for (auto& s : d.dataset.samples) {
        s.counts.row(7).setZero();
    }
    return write_dataset(d.dataset, dir.file("data"));
}

} // namespace

TEST_CASE("cli: simulate, detect, evaluate, stability") {
    TempDir dir("cli_flow");
    REQUIRE(run("simulate --out " + q(dir.file("sim")) +
                " --samples 2 --grid 10 --genes 12 --sv-genes 4 --seed 3") == 0);
    const std::string manifest = dir.file("sim/manifest.ini");
    const std::string truth = dir.file("sim/truth.tsv");
    REQUIRE(std::filesystem::exists(manifest));
    REQUIRE(std::filesystem::exists(truth));

    REQUIRE(run("detect --manifest " + q(manifest) + " --out " + q(dir.file("r1.tsv")) +
                " --degree 2 --no-filter --workers 1") == 0);
    REQUIRE(run("detect --manifest " + q(manifest) + " --out " + q(dir.file("r8.tsv")) +
                " --degree 2 --no-filter --workers 8") == 0);
    CHECK(read_text(dir.file("r1.tsv")) == read_text(dir.file("r8.tsv")));
    const DetectionReport report = read_report(dir.file("r1.tsv"));
    CHECK(report.decisions.size() == 12);
    CHECK(report.degree == 2);

    REQUIRE(run("evaluate --report " + q(dir.file("r1.tsv")) + " --truth " + q(truth) + " --out " +
                q(dir.file("eval.tsv"))) == 0);
    std::istringstream lines(read_text(dir.file("eval.tsv")));
    std::string header;
    std::string row;
    std::getline(lines, header);
    std::getline(lines, row);
    CHECK(header == "run\tseed\tsetting\tpattern\tdropout\ttp\tfp\ttn\tfn\ttpr\tfpr\tf1");
    CHECK(row.find("\t3\t1\tlinear\t") != std::string::npos);

    REQUIRE(run("stability --report " + q(dir.file("r1.tsv")) + " --report " + q(dir.file("r8.tsv")) +
                " --out " + q(dir.file("stab.tsv"))) == 0);
    const std::string stab = read_text(dir.file("stab.tsv"));
    CHECK(stab.find("\t1\n") != std::string::npos);
}

TEST_CASE("cli: a report equal to the truth scores f1 = 1") {
    TempDir dir("cli_truth");
    SimConfig c;
    c.n_samples = 1;
    c.grid_rows = c.grid_cols = 4;
    c.n_genes = 6;
    c.n_sv = 2;
    const SimulatedData d = generate(c);
    write_ground_truth(d.truth, dir.file("truth.tsv"));
    DetectionReport r;
    r.sample_ids = {"m1"};
    r.threshold_u0 = 0.5;
    r.bfdr_level = 0.01;
    for (std::size_t g = 0; g < 6; ++g) {
        GeneDecision dec;
        dec.gene_id = d.truth.gene_ids[g];
        dec.selected = d.truth.is_sv[g];
        dec.e_u1 = dec.u_tilde = dec.selected ? 1.0 : 0.0;
        dec.incl = {{0.5, 0.5}};
        dec.converged = true;
        r.decisions.push_back(dec);
    }
    write_report(r, dir.file("r.tsv"));
    REQUIRE(run("evaluate --report " + q(dir.file("r.tsv")) + " --truth " + q(dir.file("truth.tsv")) +
                " --out " + q(dir.file("e.tsv"))) == 0);
    const std::string text = read_text(dir.file("e.tsv"));
    CHECK(text.find("\t2\t0\t4\t0\t1\t0\t1\n") != std::string::npos);

    CHECK(run("evaluate --report " + q(dir.file("r.tsv")) + " --truth " + q(dir.file("absent.tsv")) +
              " --out " + q(dir.file("e2.tsv"))) != 0);
}

TEST_CASE("cli: all-zero gene converges and is not selected") {
    TempDir dir("cli_zero");
    const std::string manifest = zero_gene_dataset(dir);
    REQUIRE(run("detect --manifest " + q(manifest) + " --out " + q(dir.file("r.tsv")) +
                " --degree 2 --no-filter") == 0);
    const DetectionReport r = read_report(dir.file("r.tsv"));
    REQUIRE(r.decisions.size() == 8);
    CHECK(r.decisions[7].converged);
    CHECK(!r.decisions[7].selected);
}

TEST_CASE("cli: worker count from the environment") {
    TempDir dir("cli_env");
    const std::string manifest = zero_gene_dataset(dir);
    REQUIRE(run("detect --manifest " + q(manifest) + " --out " + q(dir.file("a.tsv")) + " --degree 1 --no-filter",
                "MSVG_WORKERS=3") == 0);
    REQUIRE(run("detect --manifest " + q(manifest) + " --out " + q(dir.file("b.tsv")) + " --degree 1 --no-filter") == 0);
    CHECK(read_text(dir.file("a.tsv")) == read_text(dir.file("b.tsv")));
    // An unusable value falls back to one worker.
    REQUIRE(run("detect --manifest " + q(manifest) + " --out " + q(dir.file("c.tsv")) + " --degree 1 --no-filter",
                "MSVG_WORKERS=zero") == 0);
    CHECK(read_text(dir.file("c.tsv")) == read_text(dir.file("a.tsv")));
}

TEST_CASE("cli: malformed input leaves no report") {
    TempDir dir("cli_bad");
    const std::string manifest = zero_gene_dataset(dir);
    const Manifest m = read_manifest(manifest);
    std::filesystem::remove(m.entries[1].coords_path);
    CHECK(run("detect --manifest " + q(manifest) + " --out " + q(dir.file("r.tsv"))) != 0);
    CHECK(!std::filesystem::exists(dir.file("r.tsv")));
    CHECK(run("detect --out " + q(dir.file("r.tsv"))) != 0);
    CHECK(run("simulate --out " + q(dir.file("s")) + " --setting 7") != 0);
}

#endif
