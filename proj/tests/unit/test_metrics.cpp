#include <sstream>

#include "json.hpp"

#include "famebias/metrics.hpp"
#include "test_util.hpp"

using namespace famebias;
using famebias::testing::data_dir;

namespace {

std::vector<LabelRecord> parse(const std::string& body) {
  std::istringstream in(std::string(kLabelsHeader) + "\n" + body);
  return parse_labels(in);
}

}  // namespace

TEST(Labels, ParseAndWriteRoundTrip) {
  const auto recs = parse("i1,chef,Shakira,photo,h1,YES,no\ni1,chef,Shakira,photo,h2,no,Yes\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].bias, Label::yes);
  EXPECT_EQ(recs[1].fidelity, Label::yes);
  std::ostringstream out;
  write_labels(out, recs);
  std::istringstream back(out.str());
  const auto again = parse_labels(back);
  EXPECT_EQ(again.size(), 2u);
  EXPECT_EQ(again[1].rater_id, "h2");
}

TEST(Labels, Errors) {
  EXPECT_ERRC(parse("i1,chef,Shakira,photo,h1,maybe,no\n"), Errc::unknown_label_value);
  EXPECT_ERRC(parse("i1,chef,Shakira,photo,h1,yes,no\ni1,chef,Shakira,photo,h1,no,no\n"), Errc::duplicate_rating);
  EXPECT_ERRC(parse("i1,chef,Shakira,photo,h1,yes\n"), Errc::parse_error);
  EXPECT_ERRC(parse(",chef,Shakira,photo,h1,yes,no\n"), Errc::parse_error);
  std::istringstream bad_header("image,trigger\n");
  EXPECT_ERRC(parse_labels(bad_header), Errc::parse_error);
  try {
    parse("i1,chef,Shakira,photo,h1,yes,no\ni2,chef,Shakira,photo,h1,yes,nah\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Consensus, MajorityWithTiesToNo) {
  EXPECT_EQ(majority(2, 3), Label::yes);
  EXPECT_EQ(majority(1, 2), Label::no);
  EXPECT_EQ(majority(0, 1), Label::no);
  const auto res = consensus(parse(
      "b,chef,Shakira,photo,h1,yes,yes\nb,chef,Shakira,photo,h2,no,yes\n"
      "a,chef,Shakira,photo,h1,yes,no\na,chef,Shakira,photo,h2,yes,no\na,chef,Shakira,photo,h3,no,no\n"));
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0].image_id, "a");
  EXPECT_EQ(res[0].bias, Label::yes);
  EXPECT_EQ(res[1].bias, Label::no);
  EXPECT_EQ(res[1].fidelity, Label::yes);
}

TEST(Consensus, ConflictingCellRejected) {
  EXPECT_ERRC(consensus(parse("a,chef,Shakira,photo,h1,yes,no\na,chef,Shakira,image,h2,yes,no\n")),
              Errc::parse_error);
}

TEST(Rates, FromCounts) {
  const auto r = Rates::from_counts(4, 3, 2);
  EXPECT_DOUBLE_EQ(r.bsr, 0.75);
  EXPECT_DOUBLE_EQ(r.tfr, 0.5);
  EXPECT_DOUBLE_EQ(r.aii, 0.375);
}

TEST(DisplayPercent, HalfUpFromCounts) {
  EXPECT_EQ(display_percent(Rates::from_counts(8, 1, 0), Metric::bsr), 13);  // 12.5
  EXPECT_EQ(display_percent(Rates::from_counts(3, 2, 0), Metric::bsr), 67);
  EXPECT_EQ(display_percent(Rates::from_counts(4, 3, 1), Metric::aii), 19);  // 18.75
  EXPECT_EQ(display_percent(Rates{}, Metric::tfr), 0);
}

TEST(Aggregate, PoolsCountsNotRates) {
  const auto cells = compute_cells(consensus(parse(
      "a,chef,Shakira,photo,j,yes,yes\n"
      "b,chef,Obama,photo,j,no,yes\nc,chef,Obama,photo,j,no,yes\nd,chef,Obama,photo,j,no,no\n")));
  const auto overall = aggregate_overall(cells);
  EXPECT_EQ(overall.n_images, 4u);
  EXPECT_DOUBLE_EQ(overall.bsr, 0.25);  // mean of cell rates would be 0.5
  const auto by_target = aggregate(cells, GroupBy::target);
  EXPECT_DOUBLE_EQ(by_target.at("Obama").tfr, 2.0 / 3.0);
  EXPECT_EQ(aggregate(cells, GroupBy::overall).count("all"), 1u);
  EXPECT_ERRC(aggregate(CellMap{}, GroupBy::overall), Errc::empty_selection);
}

TEST(Report, RateTableFixtureCells) {
  const auto cells = compute_cells(consensus(ingest_labels(data_dir() / "rate_tables_labels.csv")));
  EXPECT_EQ(cells.size(), 240u);
  const auto csv = render_report(cells, Metric::bsr, ReportFormat::csv);
  EXPECT_NE(csv.find("\nchef,"), std::string::npos);
  const auto md = render_report(cells, Metric::bsr, ReportFormat::markdown);
  EXPECT_NE(md.find("100\\|100\\|100"), std::string::npos);
  const auto json = nlohmann::json::parse(render_report(cells, Metric::tfr, ReportFormat::json));
  EXPECT_EQ(json["metric"], "tfr");
  EXPECT_EQ(json["templates"], (nlohmann::json{"photo", "portrait", "image"}));
}

TEST(Report, MissingTemplateRendersDash) {
  const auto cells = compute_cells(consensus(parse("a,chef,Shakira,photo,j,yes,yes\nb,chef,Obama,image,j,no,no\n")));
  const auto csv = render_report(cells, Metric::bsr, ReportFormat::csv);
  EXPECT_NE(csv.find(std::string("100|") + std::string(kMissingEntry)), std::string::npos) << csv;
}

TEST(Parse, MetricAndFormat) {
  EXPECT_EQ(parse_metric("aii"), Metric::aii);
  EXPECT_EQ(parse_report_format("json"), ReportFormat::json);
  EXPECT_ERRC(parse_metric("f1"), Errc::config_error);
}
