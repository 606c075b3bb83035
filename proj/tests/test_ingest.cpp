#include <doctest.h>

#include <set>

#include "dpkit/ingest.hpp"
#include "dpkit/util.hpp"
#include "helpers.hpp"

using namespace dpkit;
using namespace dpkit::ingest;

namespace {

DatasetDescriptor em_descriptor() {
  DatasetDescriptor d = registry_lookup("beer");
  d.files.data = "beer.csv";
  d.split.kind = SplitProtocol::Kind::SeededFraction;
  d.split.fractions = {0.6, 0.2, 0.2, 7};
  return d;
}

std::filesystem::path write_scratch(const std::string& name, std::string_view content) {
  auto path = testutil::scratch_file(name);
  util::write_file(path, content);
  return path;
}

}  // namespace

TEST_CASE("csv quoting edge cases") {
  auto path = write_scratch("quoting.csv",
                            "left_name,left_factory,right_name,right_factory,label\n"
                            "\"a, beer\",\"say \"\"what\"\"\",plain,\"multi\nline\",Yes\n"
                            "second,nan,third,,No\r\n");
  auto ds = load_table(path, em_descriptor());
  REQUIRE(ds.size() == 2);
  const auto& first = ds.instances[0].instance;
  CHECK(first.attributes[0].second.text() == "a, beer");
  CHECK(first.attributes[1].second.text() == "say \"what\"");
  CHECK(first.attributes[3].second.text() == "multi\nline");
  CHECK(ds.instances[0].gold == Label::binary(true));
  // nan and the empty field normalize to missing.
  const auto& second = ds.instances[1].instance;
  CHECK(second.attributes[1].second.is_missing());
  CHECK(second.attributes[3].second.is_missing());
  CHECK(ds.instances[1].gold == Label::binary(false));
  CHECK(ds.instances[0].id == "beer:000000");
}

TEST_CASE("jsonl loading") {
  auto path = write_scratch(
      "pairs.jsonl",
      R"({"left_name":"x","left_factory":"f","right_name":"y","right_factory":null,"label":"Yes"})"
      "\n"
      "\n"  // blank lines are skipped
      R"({"left_name":"z","left_factory":"g","right_name":"w","right_factory":"h","label":0})"
      "\n");
  auto ds = load_table(path, em_descriptor());
  REQUIRE(ds.size() == 2);
  CHECK(ds.instances[0].instance.attributes[3].second.is_missing());  // null -> missing
  CHECK(ds.instances[0].gold == Label::binary(true));
  CHECK(ds.instances[1].gold == Label::binary(false));  // numeric 0 -> No
}

TEST_CASE("binary label spellings") {
  auto path = write_scratch("labels.csv",
                            "left_name,left_factory,right_name,right_factory,label\n"
                            "a,b,c,d,yes\ne,f,g,h,FALSE\ni,j,k,l,1\nm,n,o,p,No\n");
  auto ds = load_table(path, em_descriptor());
  REQUIRE(ds.size() == 4);
  CHECK(ds.instances[0].gold->yes);
  CHECK_FALSE(ds.instances[1].gold->yes);
  CHECK(ds.instances[2].gold->yes);
  CHECK_FALSE(ds.instances[3].gold->yes);
}

TEST_CASE("parse errors carry line numbers") {
  auto path = write_scratch("badlabel.csv",
                            "left_name,left_factory,right_name,right_factory,label\n"
                            "a,b,c,d,Yes\n"
                            "e,f,g,h,maybe\n");
  try {
    load_table(path, em_descriptor());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("maybe") != std::string::npos);
  }
}

TEST_CASE("ragged rows are rejected with their line") {
  auto path = write_scratch("ragged.csv",
                            "left_name,left_factory,right_name,right_factory,label\n"
                            "a,b,c,d,Yes\n"
                            "too,few\n");
  CHECK_THROWS_AS(load_table(path, em_descriptor()), ParseError);
}

TEST_CASE("missing label column") {
  auto path = write_scratch("nolabel.csv",
                            "left_name,left_factory,right_name,right_factory\na,b,c,d\n");
  CHECK_THROWS_AS(load_table(path, em_descriptor()), LabelColumnMissing);
}

TEST_CASE("pair columns need side prefixes") {
  auto path = write_scratch("prefix.csv",
                            "left_name,left_factory,right_name,oops,label\na,b,c,d,Yes\n");
  CHECK_THROWS_AS(load_table(path, em_descriptor()), ParseError);
}

TEST_CASE("ED loading keeps target and label apart") {
  DatasetDescriptor d = registry_lookup("adult");
  auto path = write_scratch("ed.csv",
                            "age,income,target,label\n"
                            "30,LessThan50K,income,No\n"
                            "44,nan,income,Yes\n");
  auto ds = load_table(path, d);
  REQUIRE(ds.size() == 2);
  CHECK(ds.instances[0].target_attribute == "income");
  CHECK(ds.instances[0].instance.attributes.size() == 2);  // target/label dropped
  CHECK(ds.instances[1].instance.find("income")->is_missing());
  CHECK(ds.instances[1].gold->yes);
}

TEST_CASE("DI target column doubles as gold") {
  DatasetDescriptor d = registry_lookup("restaurant");
  auto path = write_scratch("di.csv",
                            "name,addr,phone,type,city\n"
                            "darbar,44 w. 56th st.,212-432-7227,indian,new york\n");
  auto ds = load_table(path, d);
  REQUIRE(ds.size() == 1);
  CHECK(ds.instances[0].gold == Label::value("new york"));
  CHECK(ds.instances[0].instance.find("city") == nullptr);
  CHECK(ds.instances[0].instance.attributes.size() == 4);
}

TEST_CASE("seeded split determinism and fractions") {
  auto make = [&](std::uint64_t seed) {
    DatasetDescriptor d = em_descriptor();
    d.split.fractions.seed = seed;
    std::string csv = "left_name,left_factory,right_name,right_factory,label\n";
    for (int i = 0; i < 10; ++i)
      csv += "a" + std::to_string(i) + ",b,c,d," + (i % 2 ? "Yes" : "No") + "\n";
    auto path = write_scratch("split10.csv", csv);
    Dataset ds = load_table(path, d);
    ds.descriptor = d;
    apply_split(ds);
    return ds;
  };

  auto ds = make(7);
  CHECK(ds.indices(Split::Train).size() == 6);
  CHECK(ds.indices(Split::Valid).size() == 2);
  CHECK(ds.indices(Split::Test).size() == 2);

  auto again = make(7);
  CHECK(ds.split_of == again.split_of);

  auto other = make(8);
  CHECK(ds.split_of != other.split_of);  // 10! >> collisions at these sizes

  // Every instance lands in exactly one split.
  std::set<std::size_t> seen;
  for (auto split : {Split::Train, Split::Valid, Split::Test})
    for (auto i : ds.indices(split)) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 10);
}

TEST_CASE("write_table round-trips") {
  auto src = write_scratch("rt_src.csv",
                           "left_name,left_factory,right_name,right_factory,label\n"
                           "\"comma, name\",nan,plain,\"q\"\"q\",Yes\n"
                           "x,y,z,w,No\n");
  auto ds = load_table(src, em_descriptor());
  auto dst = testutil::scratch_file("rt_dst.csv");
  write_table(ds, dst);
  auto back = load_table(dst, em_descriptor());
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.instances[i].instance.attributes == ds.instances[i].instance.attributes);
    CHECK(back.instances[i].gold == ds.instances[i].gold);
  }
}

TEST_CASE("registry lookups") {
  CHECK(registry_lookup("beer").task == TaskKind::EM);
  CHECK(registry_lookup("restaurant").task == TaskKind::DI);
  CHECK(registry_lookup("mimic-iii").task == TaskKind::SM);
  CHECK(registry_lookup("sotab").task == TaskKind::CTA);
  CHECK_THROWS_AS(registry_lookup("unknown-dataset"), UnknownDataset);
  CHECK(builtin_datasets().size() >= 20);
}

TEST_CASE("manifest overrides start from the registry") {
  auto manifest = write_scratch("beer_manifest.json", R"({
    "id": "beer",
    "files": {"data": "pairs.csv"},
    "split": {"kind": "seeded-fraction", "seed": 11},
    "label_field": "match"
  })");
  auto d = descriptor_from_manifest(manifest);
  CHECK(d.task == TaskKind::EM);
  CHECK(d.prompt.pair_noun == "Product");  // registry wording survives
  CHECK(d.files.data == "pairs.csv");
  CHECK(d.label_field == "match");
  CHECK(d.split.kind == SplitProtocol::Kind::SeededFraction);
  CHECK(d.split.fractions.seed == 11);

  auto unknown = write_scratch("mystery_manifest.json",
                               R"({"id": "mystery", "task": "em", "files": {"data": "x.csv"}})");
  CHECK(descriptor_from_manifest(unknown).task == TaskKind::EM);
  auto incomplete = write_scratch("bad_manifest.json", R"({"id": "mystery2"})");
  CHECK_THROWS(descriptor_from_manifest(incomplete));
}

TEST_CASE("shipped beer fixture loads with published shape") {
  auto ds = load_from_root(testutil::data_dir(), "beer");
  CHECK(ds.size() == 359);
  long positives = 0;
  for (const auto& inst : ds.instances)
    if (inst.gold->yes) ++positives;
  CHECK(positives == 54);

  auto train = ds.indices(Split::Train);
  auto valid = ds.indices(Split::Valid);
  auto test = ds.indices(Split::Test);
  CHECK(train.size() == 215);
  CHECK(valid.size() == 71);
  CHECK(test.size() == 73);

  long test_pos = 0;
  for (auto i : test)
    if (ds.instances[i].gold->yes) ++test_pos;
  CHECK(test_pos > 0);

  // Reloading reproduces the same split assignment.
  auto again = load_from_root(testutil::data_dir(), "beer");
  CHECK(ds.split_of == again.split_of);
}

TEST_CASE("provided split files keep rows apart") {
  DatasetDescriptor d = em_descriptor();
  d.files = {};
  d.split.kind = SplitProtocol::Kind::Provided;
  d.files.train = "prov_train.csv";
  d.files.test = "prov_test.csv";
  write_scratch("prov_train.csv",
                "left_name,left_factory,right_name,right_factory,label\na,b,c,d,Yes\n");
  write_scratch("prov_test.csv",
                "left_name,left_factory,right_name,right_factory,label\ne,f,g,h,No\n");
  auto ds = load_dataset(d, testutil::scratch_dir());
  REQUIRE(ds.size() == 2);
  CHECK(ds.indices(Split::Train).size() == 1);
  CHECK(ds.indices(Split::Valid).empty());
  CHECK(ds.indices(Split::Test).size() == 1);
  CHECK(ds.instances[0].id == "beer:train:000000");
  CHECK(ds.instances[1].id == "beer:test:000000");
}

TEST_CASE("read_csv_columns") {
  auto path = write_scratch("cols.csv", "h1,h2\na,b\n\"c,c\",d\n");
  auto with_header = read_csv_columns(path, ',', true);
  REQUIRE(with_header.size() == 2);
  CHECK(with_header[0] == std::vector<std::string>{"a", "c,c"});
  CHECK(with_header[1] == std::vector<std::string>{"b", "d"});

  auto headerless = read_csv_columns(path, ',', false);
  REQUIRE(headerless.size() == 2);
  CHECK(headerless[0] == std::vector<std::string>{"h1", "a", "c,c"});
}
