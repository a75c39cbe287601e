#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "harness.hpp"
#include "support.hpp"

using nlohmann::json;

namespace {

std::string mixed_csv() { return testdata::to_csv(testdata::mixed()); }

std::string upload(httplib::Client& cli, const std::string& csv, const std::string& name = "mixed.csv") {
    httplib::MultipartFormDataItems items{{"file", csv, name, "text/csv"}};
    const auto res = cli.Post("/datasets", items);
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 200) << res->body;
    return json::parse(res->body)["dataset_id"];
}

json get_json(httplib::Client& cli, const std::string& path, int expected = 200) {
    const auto res = cli.Get(path);
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return json::parse(res->body);
}

}  // namespace

TEST(Service, UploadReturnsSchemaAndNewIds) {
    testdata::RunningService svc(testdata::fresh_dir("insight-svc-upload"));
    auto cli = svc.client();
    httplib::MultipartFormDataItems items{{"file", mixed_csv(), "mixed.csv", "text/csv"}};
    const auto res = cli.Post("/datasets", items);
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200);
    const auto body = json::parse(res->body);
    EXPECT_EQ(body["schema"]["row_count"], 240);
    std::map<std::string, std::string> types;
    for (const auto& c : body["schema"]["columns"]) types[c["name"]] = c["type"];
    EXPECT_EQ(types["day"], "T");
    EXPECT_EQ(types["x"], "N");
    EXPECT_EQ(types["city"], "C");

    const auto again = json::parse(cli.Post("/datasets", items)->body);
    EXPECT_NE(again["dataset_id"], body["dataset_id"]);

    const auto raw = cli.Post("/datasets?name=raw.csv", mixed_csv(), "text/csv");
    ASSERT_EQ(raw->status, 200);
    EXPECT_EQ(json::parse(raw->body)["schema"]["name"], "raw.csv");

    const auto empty = cli.Post("/datasets", "", "text/csv");
    EXPECT_EQ(empty->status, 400);
    const auto err = json::parse(empty->body);
    EXPECT_TRUE(err.contains("error"));
    EXPECT_TRUE(err.contains("detail"));
}

TEST(Service, RecommendationsDefaultsFiltersAndErrors) {
    testdata::RunningService svc(testdata::fresh_dir("insight-svc-rec"));
    auto cli = svc.client();
    const auto id = upload(cli, mixed_csv());

    const auto recs = get_json(cli, "/datasets/" + id + "/recommendations");
    EXPECT_EQ(recs["top_r"], 10);
    EXPECT_EQ(recs["top_k"], 5);
    EXPECT_LE(recs["rows"].size(), 10u);
    for (std::size_t i = 1; i < recs["rows"].size(); ++i)
        EXPECT_GE(recs["rows"][i - 1]["psi"].get<double>(), recs["rows"][i]["psi"].get<double>());

    const auto filtered = get_json(cli, "/datasets/" + id + "/recommendations?attributes=x,city&top_r=3&top_k=2");
    EXPECT_LE(filtered["rows"].size(), 3u);
    for (const auto& row : filtered["rows"]) {
        EXPECT_LE(row["insights"].size(), 2u);
        for (const auto& ins : row["insights"]) {
            const auto cols = ins["combination"]["columns"].get<std::vector<std::string>>();
            EXPECT_TRUE(std::count(cols.begin(), cols.end(), "x"));
            EXPECT_TRUE(std::count(cols.begin(), cols.end(), "city"));
        }
    }

    const auto unknown = get_json(cli, "/datasets/" + id + "/recommendations?attributes=wind", 422);
    EXPECT_EQ(unknown["error"], "unknown_attribute");
    EXPECT_NE(unknown["detail"].get<std::string>().find("wind"), std::string::npos);
    get_json(cli, "/datasets/ds999/recommendations", 404);
    get_json(cli, "/datasets/ds999", 404);
    get_json(cli, "/datasets/" + id + "/recommendations?top_r=0", 400);
    EXPECT_EQ(get_json(cli, "/datasets/" + id)["row_count"], 240);
}

TEST(Service, BookmarksRoundTripAcrossRestart) {
    const auto dir = testdata::fresh_dir("insight-svc-bm");
    std::string id, bookmark_id;
    {
        testdata::RunningService svc(dir);
        auto cli = svc.client();
        id = upload(cli, mixed_csv());
        const json body{{"dataset_id", id}, {"insight_type_id", "linear_correlation"}, {"combination", {{"columns", {"x", "y"}}}}};
        const auto res = cli.Post("/bookmarks", body.dump(), "application/json");
        ASSERT_EQ(res->status, 201) << res->body;
        const auto bm = json::parse(res->body);
        bookmark_id = bm["id"];
        EXPECT_EQ(bm["chart"]["chart_type"], "scatter");
        EXPECT_TRUE(bm.contains("created_at"));

        const json missing{{"dataset_id", "ds404"}, {"insight_type_id", "trend"}, {"combination", {"day", "x"}}};
        EXPECT_EQ(cli.Post("/bookmarks", missing.dump(), "application/json")->status, 404);
        const json no_match{{"dataset_id", id}, {"insight_type_id", "trend"}, {"combination", {"x", "y"}}};
        EXPECT_EQ(cli.Post("/bookmarks", no_match.dump(), "application/json")->status, 400);
        EXPECT_EQ(cli.Post("/bookmarks", "{", "application/json")->status, 400);

        const auto listed = get_json(cli, "/bookmarks?dataset_id=" + id);
        ASSERT_EQ(listed.size(), 1u);
        EXPECT_EQ(listed[0]["id"], bookmark_id);
    }
    {
        testdata::RunningService svc(dir);
        auto cli = svc.client();
        const auto listed = get_json(cli, "/bookmarks?dataset_id=" + id);
        ASSERT_EQ(listed.size(), 1u);
        EXPECT_EQ(listed[0]["id"], bookmark_id);
        // The stored dataset is re-analyzed on demand after the restart.
        EXPECT_FALSE(get_json(cli, "/datasets/" + id + "/recommendations")["rows"].empty());
        EXPECT_NE(upload(cli, mixed_csv()), id);

        EXPECT_EQ(cli.Delete("/bookmarks/" + bookmark_id)->status, 204);
        EXPECT_EQ(cli.Delete("/bookmarks/" + bookmark_id)->status, 404);
        EXPECT_TRUE(get_json(cli, "/bookmarks").empty());
    }
    {
        testdata::RunningService svc(dir);
        auto cli = svc.client();
        EXPECT_TRUE(get_json(cli, "/bookmarks").empty());
    }
}

TEST(Service, JournalToleratesATornLastLine) {
    const auto dir = testdata::fresh_dir("insight-svc-torn");
    std::string id;
    {
        testdata::RunningService svc(dir);
        auto cli = svc.client();
        id = upload(cli, mixed_csv());
        const json body{{"dataset_id", id}, {"insight_type_id", "skew"}, {"combination", {"z"}}};
        ASSERT_EQ(cli.Post("/bookmarks", body.dump(), "application/json")->status, 201);
    }
    std::ofstream(dir / "bookmarks.jsonl", std::ios::app) << R"({"op": "add", "bookm)";
    testdata::RunningService svc(dir);
    auto cli = svc.client();
    EXPECT_EQ(get_json(cli, "/bookmarks").size(), 1u);
}

TEST(Service, ConcurrentBookmarkWritesAreSerialized) {
    const auto dir = testdata::fresh_dir("insight-svc-conc");
    std::string id;
    {
        testdata::RunningService svc(dir);
        auto first = svc.client();
        id = upload(first, mixed_csv());
        std::vector<std::thread> writers;
        for (int t = 0; t < 4; ++t) {
            writers.emplace_back([&] {
                auto cli = svc.client();
                for (int i = 0; i < 5; ++i) {
                    const json body{{"dataset_id", id}, {"insight_type_id", "skew"}, {"combination", {"z"}}};
                    EXPECT_EQ(cli.Post("/bookmarks", body.dump(), "application/json")->status, 201);
                }
            });
        }
        for (auto& w : writers) w.join();
    }
    testdata::RunningService svc(dir);
    auto cli = svc.client();
    const auto listed = get_json(cli, "/bookmarks");
    EXPECT_EQ(listed.size(), 20u);
    std::set<std::string> ids;
    for (const auto& b : listed) ids.insert(b["id"]);
    EXPECT_EQ(ids.size(), 20u);
}
