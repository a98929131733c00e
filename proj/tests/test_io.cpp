// Copyright 2026 The heraldsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "heraldsim/records.hpp"
#include "heraldsim/table.hpp"

using namespace heraldsim;

namespace {

std::string simulated(int threads) {
    std::ostringstream out;
    write_simulation(out, LoopConfig::reference(0.25, 0.55), 3, 5000, 42, threads);
    return out.str();
}

ErrorKind kind_of(const std::function<void()> &fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::invalid_argument;
}

}  // namespace

TEST(Records, RoundTrip) {
    std::string text = simulated(1);
    std::istringstream in(text);
    auto file = read_records(in);
    EXPECT_EQ(file.records.passes(), 3);
    EXPECT_EQ(file.records.size(), 5000u);
    EXPECT_EQ(file.seed, 42u);
    EXPECT_EQ(file.preamble["kind"], "records");
    EXPECT_NEAR(file.config.squeeze.front().gamma, gain_from_zeta(0.25).gamma, 1e-15);
    EXPECT_EQ(file.config.loop_eff, (std::vector<double>{0.55}));
    EXPECT_EQ(file.config.herald.efficiency, 0.36);
    auto direct = sample_records(LoopConfig::reference(0.25, 0.55), 3, 5000, 42);
    for (std::size_t i = 0; i < direct.size(); ++i) {
        ASSERT_EQ(file.records[i].pattern(), direct[i].pattern());
        ASSERT_EQ(file.records[i].signal, direct[i].signal);
    }
    std::ostringstream again;
    RecordWriter w(again, file.preamble, 3);
    w.write(file.records);
    EXPECT_EQ(again.str(), text);
}

TEST(Records, BytesIndependentOfThreads) {
    std::string one = simulated(1);
    EXPECT_EQ(one, simulated(2));
    EXPECT_EQ(one, simulated(5));
}

TEST(Records, MalformedInputIsAnIoError) {
    const std::string pre = "# " + simulation_preamble(LoopConfig::reference(0.2), 2, 2, 1).dump() + "\n";
    auto parse = [](const std::string &s) {
        return [s] {
            std::istringstream in(s);
            read_records(in);
        };
    };
    EXPECT_EQ(kind_of(parse("pass1,pass2,signal\n0,1,2\n")), ErrorKind::io);
    EXPECT_EQ(kind_of(parse("# {not json\npass1,signal\n")), ErrorKind::io);
    EXPECT_EQ(kind_of(parse(pre)), ErrorKind::io);
    EXPECT_EQ(kind_of(parse(pre + "pass1,signal,pass2\n")), ErrorKind::io);
    EXPECT_EQ(kind_of(parse(pre + "pass1,pass2,signal\n0,1\n")), ErrorKind::io);
    EXPECT_EQ(kind_of(parse(pre + "pass1,pass2,signal\n0,1,2,3\n")), ErrorKind::io);
    EXPECT_EQ(kind_of(parse(pre + "pass1,pass2,signal\n0,x,2\n")), ErrorKind::io);
    EXPECT_EQ(kind_of(parse(pre + "pass1,pass2,signal\n0,1,300\n")), ErrorKind::io);
    EXPECT_EQ(kind_of([] { read_records(std::string("/nonexistent/records.csv")); }), ErrorKind::io);
    std::istringstream ok(pre + "pass1,pass2,signal\n0,1,2\n\n1,0,0\n");
    EXPECT_EQ(read_records(ok).records.size(), 2u);
}

TEST(Table, FormatReal) {
    EXPECT_EQ(format_real(0.1), "0.1");
    EXPECT_EQ(format_real(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(format_real(std::nan("")), "nan");
    EXPECT_EQ(format_real(-INFINITY), "-inf");
    EXPECT_EQ(parse_table_format("json"), TableFormat::json);
    EXPECT_THROW(parse_table_format("xml"), Error);
}

TEST(Table, CsvRoundTripIsByteStable) {
    Table t;
    t.columns = {"pattern", "n", "P", "note"};
    t.add_row({std::string("(1,1)"), std::int64_t{2}, 0.0016222176652828962, std::string("a,\"b\"")});
    t.add_row({std::string("(2)"), std::int64_t{2}, std::nan(""), std::string("insufficient-data")});
    t.add_row({std::string("(3)"), std::int64_t{3}, INFINITY, std::string("")});
    EXPECT_THROW(t.add_row({std::string("x")}), Error);
    nlohmann::json pre{{"kind", "analysis"}, {"seed", 3}};
    std::ostringstream first;
    emit_table(t, TableFormat::csv, first, pre);
    std::istringstream in(first.str());
    auto parsed = read_csv_table(in);
    EXPECT_EQ(parsed.preamble, pre);
    EXPECT_EQ(parsed.table.columns, t.columns);
    EXPECT_EQ(std::get<std::string>(parsed.table.rows[0][3]), "a,\"b\"");
    EXPECT_EQ(std::get<std::int64_t>(parsed.table.rows[0][1]), 2);
    EXPECT_NEAR(std::get<double>(parsed.table.rows[0][2]), 0.0016222176652828962, 1e-14);
    std::ostringstream second;
    emit_table(parsed.table, TableFormat::csv, second, parsed.preamble);
    EXPECT_EQ(second.str(), first.str());
}

TEST(Table, JsonLayout) {
    Table t;
    t.columns = {"pattern", "P"};
    t.add_row({std::string("(1)"), 0.25});
    t.add_row({std::string("(2)"), std::nan("")});
    std::ostringstream out;
    emit_table(t, TableFormat::json, out, {{"kind", "theory"}});
    auto doc = nlohmann::json::parse(out.str());
    EXPECT_EQ(doc["config"]["kind"], "theory");
    EXPECT_EQ(doc["columns"], (nlohmann::json{"pattern", "P"}));
    EXPECT_EQ(doc["rows"][0]["P"], 0.25);
    EXPECT_TRUE(doc["rows"][1]["P"].is_null());
}

TEST(Table, EmptyTableRefused) {
    Table t;
    t.columns = {"a"};
    std::ostringstream out;
    EXPECT_THROW(emit_table(t, TableFormat::csv, out, {}), Error);
}
