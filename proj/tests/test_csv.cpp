#include <catch2/catch_amalgamated.hpp>

#include "hdlogit/csv.hpp"

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace hdlogit;

namespace {

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& body) {
        static std::atomic<int> counter{0};
        path = (std::filesystem::temp_directory_path() /
                ("hdlogit_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++) + ".csv"))
                   .string();
        std::ofstream out(path);
        out << body;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("read_csv parses a well-formed file", "[csv]") {
    TempCsv f("y,d,x1\n1,0.5,-2\n0,1.25,3\n");
    CsvTable t = read_csv(f.path);
    REQUIRE(t.columns == std::vector<std::string>{"y", "d", "x1"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == 0.5);
    CHECK(t.rows[1][2] == 3.0);
}

TEST_CASE("read_csv tolerates CRLF and padding, skips blank lines", "[csv]") {
    TempCsv f("y,d\r\n 1 ,\t2\r\n\n0,4\n");
    CsvTable t = read_csv(f.path);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == 1.0);
    CHECK(t.rows[0][1] == 2.0);
}

TEST_CASE("read_csv errors name the offending row and column", "[csv]") {
    TempCsv f("y,d\n1,2\n1,oops\n");
    try {
        read_csv(f.path);
        FAIL("expected an error");
    } catch (const InvalidInputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 3") != std::string::npos);
        CHECK(msg.find("'d'") != std::string::npos);
    }
}

TEST_CASE("read_csv rejects ragged rows, empty files, non-finite cells", "[csv]") {
    TempCsv ragged("a,b\n1,2,3\n");
    CHECK_THROWS_AS(read_csv(ragged.path), InvalidInputError);
    TempCsv shortrow("a,b\n1\n");
    CHECK_THROWS_AS(read_csv(shortrow.path), InvalidInputError);
    TempCsv headeronly("a,b\n");
    CHECK_THROWS_AS(read_csv(headeronly.path), InvalidInputError);
    TempCsv infrow("a,b\n1,inf\n");
    CHECK_THROWS_AS(read_csv(infrow.path), InvalidInputError);
    CHECK_THROWS_AS(read_csv("/nonexistent/nowhere.csv"), InvalidInputError);
}

TEST_CASE("dataset_from_table wires outcome, treatment, controls", "[csv]") {
    TempCsv f("x1,y,d,x2\n0.5,1,2,-1\n1.5,0,3,-2\n2.5,1,4,-3\n");
    CsvTable t = read_csv(f.path);

    Dataset with = dataset_from_table(t, "y", "d", true);
    CHECK(with.y(0) == 1.0);
    CHECK(with.d(2) == 4.0);
    REQUIRE(with.X.cols() == 3);
    CHECK(with.intercept == 0);
    CHECK(with.X.col(0).isOnes());
    CHECK(with.col_names == std::vector<std::string>{"(intercept)", "x1", "x2"});
    CHECK(with.X(1, 1) == 1.5);
    CHECK(with.X(1, 2) == -2.0);

    Dataset without = dataset_from_table(t, "y", "d", false);
    CHECK(without.intercept == -1);
    REQUIRE(without.X.cols() == 2);
    CHECK(without.col_names == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("dataset_from_table validates names and the binary outcome", "[csv]") {
    TempCsv f("y,d,x1\n1,2,3\n0.5,1,2\n");
    CsvTable t = read_csv(f.path);
    CHECK_THROWS_AS(dataset_from_table(t, "nope", "d", true), InvalidInputError);
    CHECK_THROWS_AS(dataset_from_table(t, "y", "y", true), InvalidInputError);
    try {
        dataset_from_table(t, "y", "d", true);
        FAIL("expected an error");
    } catch (const InvalidInputError& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
}
