#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "dwsim/commands.hpp"

using namespace dwsim;

namespace {

const char* kMinimal = "[lattice]\nu1_er = 84\ntheta_deg = 80\nbx_mg = 85\n";

std::string error_of(const std::string& text)
{
    try {
        parse_config_string(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::filesystem::path scratch(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("dwsim_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST(Config, MinimalAppliesDefaults)
{
    const auto rc = parse_config_string(kMinimal);
    EXPECT_EQ(rc.lattice.u1_er, 84.0);
    EXPECT_EQ(rc.lattice.bz_mg, 0.0);
    EXPECT_EQ(rc.lattice.n_planewaves, 24);
    EXPECT_EQ(rc.lattice.phase, FictitiousPhase::quadrature_sin);
    EXPECT_FALSE(rc.rabi.has_value());
    const auto& d = rc.defaults_applied;
    EXPECT_NE(std::find(d.begin(), d.end(), "lattice.bz_mg"), d.end());
    EXPECT_EQ(std::find(d.begin(), d.end(), "lattice.u1_er"), d.end());
    EXPECT_EQ(rc.resolved.at("lattice").at("theta_deg"), "80");
}

TEST(Config, TopLevelKeysAndComments)
{
    const auto rc = parse_config_string("# comment\nu1_er = 90 ; trailing\ntheta_deg = 75\nbx_mg = 60\n"
                                        "[output]\nprecision = 8\n");
    EXPECT_EQ(rc.lattice.u1_er, 90.0);
    EXPECT_EQ(rc.output.precision, 8);
}

TEST(Config, EmptySectionEnablesCommand)
{
    const auto rc = parse_config_string(std::string(kMinimal) + "[prepare]\n\n[rabi]\n");
    ASSERT_TRUE(rc.prepare.has_value());
    ASSERT_TRUE(rc.rabi.has_value());
    EXPECT_EQ(rc.prepare->bx_ramp_us, 250.0);
    EXPECT_EQ(rc.prepare->bz_ramp_us, 70.0);
}

TEST(Config, MissingRequiredKeysListed)
{
    const auto msg = error_of("[lattice]\ntheta_deg = 80\n");
    EXPECT_NE(msg.find("u1_er"), std::string::npos);
    EXPECT_NE(msg.find("bx_mg"), std::string::npos);
    EXPECT_NE(msg.find("required"), std::string::npos);
}

TEST(Config, RejectsBadInput)
{
    const std::string base = kMinimal;
    EXPECT_NE(error_of(base + "colour = red\n").find("unknown key"), std::string::npos);
    EXPECT_NE(error_of(base + "[extra]\nx = 1\n").find("unknown section"), std::string::npos);
    EXPECT_NE(error_of("[lattice]\nu1_er = -4\ntheta_deg = 80\nbx_mg = 85\n").find("out of range"),
              std::string::npos);
    EXPECT_NE(error_of("[lattice]\nu1_er = abc\ntheta_deg = 80\nbx_mg = 85\n").find("not a number"),
              std::string::npos);
    EXPECT_FALSE(error_of(base + "[sweep]\nparameter = gravity\n").empty());
    EXPECT_FALSE(error_of(base + "[sweep]\nparameter = bz\nstart = -500\n").empty());
    EXPECT_FALSE(error_of(base + "[ensemble]\nu1_relative_spread = 0.5\n").empty());
    EXPECT_FALSE(error_of(base + "[ensemble]\ndistribution = cauchy\n").empty());
    EXPECT_FALSE(error_of(base + "[fit]\n").empty());
    EXPECT_FALSE(error_of(base + "fictitious_phase = tan\n").empty());
    EXPECT_FALSE(error_of("[lattice\nu1_er = 1\n").empty());
    EXPECT_THROW(parse_config("/nonexistent/dwsim.ini"), ConfigError);
}

TEST(Config, SweepDefaultsPerAxis)
{
    const auto rc = parse_config_string(std::string(kMinimal) + "[sweep]\nparameter = bx\n");
    ASSERT_TRUE(rc.sweep.has_value());
    EXPECT_EQ(rc.sweep->axis, SweepAxis::bx);
    EXPECT_EQ(rc.sweep->start, 40.0);
    EXPECT_EQ(rc.sweep->stop, 150.0);
    const auto v = rc.sweep->values();
    ASSERT_EQ(v.size(), 15u);
    EXPECT_DOUBLE_EQ(v.back(), 150.0);
}

TEST(Output, NumberFormatting)
{
    EXPECT_EQ(format_number(-0.0, 12), "0");
    EXPECT_EQ(format_number(0.5, 12), "0.5");
    EXPECT_EQ(format_number(1.0 / 3.0, 4), "0.3333");
    EXPECT_EQ(format_number(std::nan(""), 12), "nan");
    EXPECT_EQ(format_number(-HUGE_VAL, 12), "-inf");
}

TEST(Output, CsvQuoting)
{
    CsvTable t({"a", "b"});
    t.add_row({"x,y", "say \"hi\""});
    EXPECT_EQ(t.str(), "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n");
    EXPECT_THROW(t.add_row({"1"}), NumericalError);
}

TEST(Output, Sha256)
{
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Output, CsvColumnRoundTrip)
{
    const auto dir = scratch("csv");
    CsvTable t({"t_us", "fz"});
    t.add_numbers({0.0, 1.5}, 12);
    t.add_numbers({2.0, -0.25}, 12);
    {
        std::ofstream out(dir / "in.csv", std::ios::binary);
        out << t.str();
    }
    EXPECT_EQ(read_csv_column(dir / "in.csv", "fz"), (std::vector<double>{1.5, -0.25}));
    EXPECT_THROW(read_csv_column(dir / "in.csv", "missing"), ConfigError);
    {
        std::ofstream out(dir / "bad.csv");
        out << "t_us,fz\n1,abc\n";
    }
    EXPECT_THROW(read_csv_column(dir / "bad.csv", "fz"), ConfigError);
}

TEST(Output, ManifestListsFilesWithChecksums)
{
    const auto rc = parse_config_string(kMinimal);
    OutputBundle b("potentials", rc);
    b.add_file("x.txt", "hello");
    b.note("n1");
    const auto m = b.manifest();
    EXPECT_EQ(m["command"], "potentials");
    EXPECT_EQ(m["files"][0]["name"], "x.txt");
    EXPECT_EQ(m["files"][0]["bytes"], 5);
    EXPECT_EQ(m["files"][0]["sha256"], sha256_hex("hello"));
    EXPECT_EQ(m["config"]["lattice"]["u1_er"], "84");
    const auto dir = scratch("bundle");
    const auto written = b.write(dir);
    EXPECT_EQ(written.size(), 2u);
    EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
}

TEST(Commands, MissingSectionIsConfigError)
{
    const auto rc = parse_config_string(kMinimal);
    for (const char* cmd : {"rabi", "prepare", "sweep", "ensemble", "fit"})
        EXPECT_THROW(run_command(cmd, rc), ConfigError) << cmd;
    EXPECT_THROW(run_command("dance", rc), ConfigError);
}

TEST(Commands, PotentialsTable)
{
    const auto rc = parse_config_string(std::string(kMinimal) + "z_points = 64\n");
    const auto b = run_command("potentials", rc);
    const auto& csv = b.file("potentials.csv");
    EXPECT_EQ(csv.substr(0, csv.find("\r\n")).substr(0, 24), "z_nm,adiabatic_1,adiabat");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 65);
}

TEST(Commands, SweepIndependentOfWorkers)
{
    const auto rc = parse_config_string(std::string(kMinimal) +
                                        "n_q = 5\n[sweep]\nparameter = bz\nstart = -10\nstop = 10\nsteps = 5\n");
    const auto one = run_command("sweep", rc, 1);
    const auto four = run_command("sweep", rc, 4);
    EXPECT_EQ(one.file("sweep.csv"), four.file("sweep.csv"));
    EXPECT_EQ(one.manifest().dump(), four.manifest().dump());
}

TEST(Commands, FitFromCsv)
{
    const auto dir = scratch("fit");
    CsvTable t({"t_us", "fz"});
    for (int k = 0; k <= 300; ++k) {
        const double tt = 5.0 * k;
        t.add_numbers({tt, 2.0 * std::exp(-tt / 300.0) * std::cos(2.0 * M_PI * 3.0e-3 * tt)}, 15);
    }
    {
        std::ofstream out(dir / "signal.csv", std::ios::binary);
        out << t.str();
    }
    std::ofstream(dir / "fit.ini") << kMinimal << "[fit]\ninput = signal.csv\n";
    const auto rc = parse_config(dir / "fit.ini");
    const auto b = run_command("fit", rc);
    const auto j = json::parse(b.file("fit.json"));
    EXPECT_NEAR(j["frequency_khz"].get<double>(), 3.0, 1e-6);
    EXPECT_NEAR(j["tau_us"].get<double>(), 300.0, 1e-3);
}
