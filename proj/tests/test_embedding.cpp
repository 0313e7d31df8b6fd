#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "dmdte/embedding.hpp"
#include "dmdte/forecast.hpp"

using namespace dmdte;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "dmdte_embedding_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(BuildEmbedding, ImaginaryUnit) {
    const TimeEmbedding e = build_embedding(VectorXc{{cplx(0, 1)}}, 0, 4, false);
    MatrixXd expected(4, 2);
    expected << 1, 0, 0, 1, -1, 0, 0, -1;
    EXPECT_LE((e.table - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BuildEmbedding, ConstantMode) {
    const TimeEmbedding e = build_embedding(VectorXc{{cplx(1, 0)}}, 0, 10);
    for (Index t = 0; t < 10; ++t) {
        EXPECT_EQ(e.table(t, 0), 1.0);
        EXPECT_EQ(e.table(t, 1), 0.0);
    }
}

TEST(BuildEmbedding, ProjectionStripsModulus) {
    const TimeEmbedding e = build_embedding(VectorXc{{std::polar(0.9, 2 * M_PI / 24)}}, 0, 24);
    EXPECT_NEAR(e.table(12, 0), -1.0, 1e-8);
    EXPECT_NEAR(e.table(12, 1), 0.0, 1e-8);
    EXPECT_TRUE(e.unit_circle_projected);
}

TEST(BuildEmbedding, Errors) {
    EXPECT_THROW(build_embedding(VectorXc{{cplx(0, 0)}}, 0, 4), ConfigError);
    EXPECT_THROW(build_embedding(VectorXc{{cplx(1, 0)}}, 4, 4), ConfigError);
    EXPECT_THROW(build_embedding(VectorXc{{cplx(0.5, -0.5)}}, 0, 4), ConfigError);
}

TEST(BuildEmbedding, PeriodicityAndBoundedness) {
    for (int p : {2, 7, 24, 72, 504}) {
        const TimeEmbedding e = build_embedding(VectorXc{{std::polar(1.0, 2 * M_PI / p)}}, 0, 3 * p + 5);
        for (Index t = 0; t + p < e.length(); ++t) {
            EXPECT_LE((e.table.row(t + p) - e.table.row(t)).cwiseAbs().maxCoeff(), 1e-8);
        }
        EXPECT_LE(e.table.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
    }
}

TEST(BuildEmbedding, ExtrapolationConsistency) {
    VectorXc l(3);
    l << std::polar(1.0, 2 * M_PI / 72), std::polar(0.999, 2 * M_PI / 504), std::polar(1.0, 0.0);
    for (bool project : {true, false}) {
        const long len = 2016;
        const TimeEmbedding a = build_embedding(l, 0, len, project);
        const TimeEmbedding b = build_embedding(l, len, 2 * len, project);
        const TimeEmbedding whole = build_embedding(l, 0, 2 * len, project);
        MatrixXd stacked(2 * len, 6);
        stacked << a.table, b.table;
        EXPECT_LE((stacked - whole.table).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(BuildEmbedding, OriginAnchorsThePowers) {
    const cplx l = std::polar(1.0, 0.3);
    const TimeEmbedding e = build_embedding(VectorXc{{l}}, 100, 110, true, 95);
    EXPECT_NEAR(e.at(95 + 5)(0), std::cos(5 * 0.3), 1e-12);
    EXPECT_THROW(e.at(99), ConfigError);
    EXPECT_THROW(e.at(110), ConfigError);
}

TEST(PairRepresentatives, OnePerPairWithNonnegativeImaginary) {
    VectorXc l(5);
    l << cplx(0.5, -0.5), cplx(0.5, 0.5), cplx(0.9, 0.0), cplx(0.1, 0.8), cplx(0.1, -0.8);
    const VectorXc r = pair_representatives(l);
    ASSERT_EQ(r.size(), 3);
    EXPECT_EQ(r(0), cplx(0.5, 0.5));
    EXPECT_EQ(r(1), cplx(0.9, 0.0));
    EXPECT_EQ(r(2), cplx(0.1, 0.8));
}

TEST(AttachCovariates, EmptyEmbeddingLeavesWindowsUnchanged) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(2, 40));
    const ForecastWindows w = make_windows(s, Split::train, 12, 12);
    const TimeEmbedding e = build_embedding(VectorXc(0), 0, 40);
    const ForecastWindows out = attach_covariates(w, e);
    EXPECT_EQ(out.channels(), 1);
    EXPECT_EQ(feature_matrix(out), feature_matrix(w));
}

TEST(AttachCovariates, ConstantModeAddsOneZeroChannels) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(1, 10));
    const ForecastWindows w = make_windows(s, Split::train, 1, 1);
    const ForecastWindows out = attach_covariates(w, build_embedding(VectorXc{{cplx(1, 0)}}, 0, 10));
    ASSERT_EQ(out.size(), 9);
    for (const Window& win : out.windows) {
        ASSERT_EQ(win.inputs.cols(), 3);
        EXPECT_EQ(win.inputs(0, 1), 1.0);
        EXPECT_EQ(win.inputs(0, 2), 0.0);
        EXPECT_EQ(win.future_covariates, (MatrixXd(1, 2) << 1.0, 0.0).finished());
    }
}

TEST(AttachCovariates, ShapeContract) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(3, 60));
    VectorXc l(2);
    l << std::polar(1.0, 0.2), std::polar(1.0, 1.1);
    const ForecastWindows w = make_windows(s, Split::train, 12, 12, nullptr);
    const ForecastWindows out = attach_covariates(w, build_embedding(l, 0, 60));
    const CovariateAttachment att = attachment_of(out);
    EXPECT_EQ(att.base_channels, 1);
    EXPECT_EQ(att.embedded_channels, 5);
    for (const Window& win : out.windows) {
        EXPECT_EQ(win.inputs.rows(), 12);
        EXPECT_EQ(win.inputs.cols(), 5);
        EXPECT_EQ(win.future_covariates.rows(), 12);
        EXPECT_EQ(win.future_covariates.cols(), 4);
    }
}

TEST(AttachCovariates, AlignmentUsesAbsoluteSteps) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(1, 50)).slice(20, 50);
    const cplx l = std::polar(1.0, 0.4);
    const TimeEmbedding e = build_embedding(VectorXc{{l}}, 0, 50);
    const ForecastWindows out = make_windows(s, Split::test, 3, 2, &e);
    const Window& w = out.windows.front();
    EXPECT_EQ(w.anchor_step, 22);
    EXPECT_NEAR(w.inputs(0, 1), std::cos(0.4 * 20), 1e-12);
    EXPECT_NEAR(w.future_covariates(1, 1), std::sin(0.4 * 24), 1e-12);
}

TEST(AttachCovariates, NamesFirstUncoveredStep) {
    const SignalMatrix s = SignalMatrix::from_values(MatrixXd::Random(1, 30));
    const ForecastWindows w = make_windows(s, Split::train, 4, 4);
    try {
        attach_covariates(w, build_embedding(VectorXc{{cplx(1, 0)}}, 0, 25));
        FAIL() << "expected coverage error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("step 25"), std::string::npos) << e.what();
    }
}

TEST(ExportEmbedding, ConstantModeRows) {
    const auto path = temp_file("constant.csv");
    export_embedding(build_embedding(VectorXc{{cplx(1, 0)}}, 0, 2), path);
    EXPECT_EQ(slurp(path), "step,re_1,im_1\n0,1,0\n1,1,0\n");
}

TEST(ExportEmbedding, RoundTripIsBitIdentical) {
    VectorXc l(3);
    l << cplx(0, 1), std::polar(1.0, 2 * M_PI / 72), std::polar(0.98, 2 * M_PI / 504);
    for (bool project : {true, false}) {
        const TimeEmbedding e = build_embedding(l, 0, 4032, project);
        const auto path = temp_file("roundtrip.csv");
        export_embedding(e, path);
        const TimeEmbedding back = import_embedding(path);
        EXPECT_EQ(back.table, e.table);
        EXPECT_EQ(back.first_step, 0);
        EXPECT_EQ(back.unit_circle_projected, project);
        EXPECT_LE((back.eigenvalues - (project ? l.cwiseQuotient(l.cwiseAbs().cast<cplx>()) : l)).norm(), 1e-12);
    }
}
