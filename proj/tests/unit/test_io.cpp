#include "doctest.h"

#include "spatspec/io.hpp"

#include <filesystem>
#include <fstream>

using namespace spatspec;
namespace fs = std::filesystem;

namespace {

fs::path write(const std::string& name, const std::string& body) {
    const fs::path p = fs::temp_directory_path() / ("spatspec_io_" + name);
    std::ofstream(p) << body;
    return p;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("matrix csv with and without a header") {
    const Matrix a = read_matrix_csv(write("a.csv", "x1,x2\n1,2\n3,4.5\n"));
    CHECK(a.rows() == 2);
    CHECK(a(1, 1) == 4.5);
    const Matrix b = read_matrix_csv(write("b.csv", "1, 2\n\n-3,+4e-1\n"));
    CHECK(b(1, 1) == doctest::Approx(0.4));
    CHECK(read_vector_csv(write("y.csv", "y\n1\n2\n3\n")).size() == 3);
}

TEST_CASE("malformed files raise DataError") {
    CHECK_THROWS_AS((void)read_matrix_csv("/nonexistent/file.csv"), DataError);
    CHECK_THROWS_AS((void)read_matrix_csv(write("ragged.csv", "1,2\n3\n")), DataError);
    CHECK_THROWS_AS((void)read_matrix_csv(write("text.csv", "1,2\n3,x\n")), DataError);
    CHECK_THROWS_AS((void)read_matrix_csv(write("empty.csv", "a,b\n")), DataError);
    CHECK_THROWS_AS((void)read_vector_csv(write("two.csv", "1,2\n")), DataError);
    CHECK_THROWS_AS((void)read_mask_csv(write("mask.csv", "0,2\n1,0\n")), DataError);
}

TEST_CASE("model config resolves weights and families") {
    const fs::path w = write("w.csv", "row,col,value\n0,1,1\n1,0,1\n1,2,1\n2,1,1\n");
    const auto dir = w.parent_path();
    const nlohmann::json j = {{"family", "sarma"},
                              {"ar_weights", w.filename().string()},
                              {"ma_weights", {w.filename().string()}},
                              {"sar_weights", {w.filename().string()}}};
    const ModelConfig cfg = parse_model_config(j, dir, 3, {});
    CHECK(cfg.cov.params_dim() == 2);
    CHECK(cfg.sar.size() == 1);
    CHECK(cfg.cov.family_name() == "sarma");
    CHECK_THROWS_AS((void)parse_model_config({{"family", "sem"}}, dir, 3, {}), DataError);
    CHECK_THROWS_AS((void)parse_model_config({{"family", "nope"}}, dir, 3, {}), DataError);
    const fs::path dense = write("w_dense.csv", "0,1,0\n1,0,1\n0,1,0\n");
    CHECK_THROWS_AS((void)parse_model_config({{"family", "sem"}, {"weights", dense.filename().string()}}, dir, 4, {}),
                    DataError);
    const nlohmann::json js = {{"family", "sem"},
                               {"weights", w.filename().string()},
                               {"space", {{"lower", {-0.5}}, {"upper", {0.5}}, {"log_scale", {false}}}}};
    CHECK(parse_model_config(js, dir, 3, {}).space->upper(0) == 0.5);
}

TEST_CASE("null family names") {
    CHECK(parse_null_family("linear").kind == NullFamily::Kind::linear);
    CHECK(parse_null_family("constant").kind == NullFamily::Kind::constant);
    CHECK_THROWS_AS((void)parse_null_family("quadratic"), DataError);
}

}
