#include "dpkit/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dpkit/util.hpp"

namespace dpkit::ingest {

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split_of.size(); ++i) {
    if (split_of[i] == split) out.push_back(i);
  }
  return out;
}

namespace {

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  // physical start line per row
};

RawTable parse_csv(const std::string& content, char delimiter) {
  RawTable table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  std::size_t record_line = 1;
  bool any_char = false;

  auto end_field = [&]() {
    record.push_back(field);
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&](std::size_t next_line) {
    end_field();
    if (table.header.empty()) {
      table.header = record;
    } else {
      if (record.size() != table.header.size()) {
        throw ParseError(record_line,
                         "expected " + std::to_string(table.header.size()) + " fields, got " +
                             std::to_string(record.size()));
      }
      table.rows.push_back(record);
      table.row_lines.push_back(record_line);
    }
    record.clear();
    record_line = next_line;
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    any_char = true;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_was_quoted)
        throw ParseError(line, "quote inside unquoted field");
      in_quotes = true;
      field_was_quoted = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\r') {
      if (i + 1 < content.size() && content[i + 1] != '\n')
        throw ParseError(line, "stray carriage return");
    } else if (c == '\n') {
      ++line;
      end_record(line);
    } else {
      if (field_was_quoted) throw ParseError(line, "content after closing quote");
      field.push_back(c);
    }
  }
  if (in_quotes) throw ParseError(record_line, "unterminated quoted field");
  // Final record without trailing newline.
  if (any_char && (!field.empty() || field_was_quoted || !record.empty())) end_record(line);
  if (table.header.empty()) throw ParseError(1, "empty file");
  return table;
}

RawTable parse_jsonl(const std::string& content) {
  RawTable table;
  std::size_t line_no = 0;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    nlohmann::ordered_json obj;
    try {
      obj = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("invalid json: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "expected a flat json object");
    std::vector<std::string> row;
    if (table.header.empty()) {
      for (auto& [key, value] : obj.items()) table.header.push_back(key);
    }
    for (const std::string& key : table.header) {
      if (!obj.contains(key)) throw ParseError(line_no, "missing field: " + key);
      const auto& v = obj[key];
      if (v.is_string()) {
        row.push_back(v.get<std::string>());
      } else if (v.is_null()) {
        row.push_back("");
      } else if (v.is_primitive()) {
        row.push_back(v.dump());
      } else {
        throw ParseError(line_no, "field '" + key + "' is not flat");
      }
    }
    if (obj.size() != table.header.size())
      throw ParseError(line_no, "record fields do not match first record");
    table.rows.push_back(std::move(row));
    table.row_lines.push_back(line_no);
  }
  if (table.header.empty()) throw ParseError(1, "empty file");
  return table;
}

bool parse_binary_gold(std::string_view raw, bool& out) {
  std::string v = util::lower(util::trim(raw));
  if (v == "yes" || v == "1" || v == "true") {
    out = true;
    return true;
  }
  if (v == "no" || v == "0" || v == "false") {
    out = false;
    return true;
  }
  return false;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return header.size();
}

std::string make_id(const std::string& prefix, std::size_t ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", ordinal);
  return prefix + ":" + buf;
}

}  // namespace

Dataset load_table(const std::filesystem::path& path, const DatasetDescriptor& descriptor,
                   const std::string& id_prefix) {
  const std::string content = util::read_file(path);
  const std::string ext = util::lower(path.extension().string());
  RawTable table = (ext == ".jsonl" || ext == ".ndjson")
                       ? parse_jsonl(content)
                       : parse_csv(content, descriptor.delimiter);

  if (descriptor.task == TaskKind::CTA)
    throw Error("cta tables load as raw columns via read_csv_columns");

  const std::string prefix = id_prefix.empty() ? descriptor.id : id_prefix;
  const std::size_t label_col = find_column(table.header, descriptor.label_field);
  const bool has_label_col = label_col < table.header.size();

  Dataset dataset;
  dataset.descriptor = descriptor;

  // Gold for DI defaults to the target attribute's own column.
  std::size_t di_gold_col = label_col;
  if (descriptor.task == TaskKind::DI) {
    if (descriptor.target_attribute.empty())
      throw Error("di descriptor for '" + descriptor.id + "' needs target_attribute");
    if (!has_label_col) {
      di_gold_col = find_column(table.header, descriptor.target_attribute);
      if (di_gold_col == table.header.size())
        throw LabelColumnMissing("dataset '" + descriptor.id + "' has neither label column '" +
                                 descriptor.label_field + "' nor target column '" +
                                 descriptor.target_attribute + "'");
    }
  } else if (!has_label_col) {
    throw LabelColumnMissing("dataset '" + descriptor.id + "' is missing label column '" +
                             descriptor.label_field + "'");
  }

  std::size_t target_col = table.header.size();
  if (descriptor.task == TaskKind::ED) {
    target_col = find_column(table.header, descriptor.target_field);
    if (target_col == table.header.size())
      throw LabelColumnMissing("ed dataset '" + descriptor.id + "' is missing target column '" +
                               descriptor.target_field + "'");
  }

  std::size_t desc_col = table.header.size(), attr_col = table.header.size();
  if (descriptor.task == TaskKind::AVE) {
    desc_col = find_column(table.header, descriptor.description_field);
    attr_col = find_column(table.header, descriptor.attribute_field);
    if (desc_col == table.header.size() || attr_col == table.header.size())
      throw LabelColumnMissing("ave dataset '" + descriptor.id +
                               "' needs description and attribute columns");
  }

  const bool is_pair = descriptor.task == TaskKind::SM || descriptor.task == TaskKind::EM;
  std::vector<std::size_t> left_cols, right_cols, record_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == label_col || c == target_col) continue;
    const std::string& name = table.header[c];
    if (is_pair) {
      if (name.starts_with(descriptor.pair_left_prefix)) {
        left_cols.push_back(c);
      } else if (name.starts_with(descriptor.pair_right_prefix)) {
        right_cols.push_back(c);
      } else {
        throw ParseError(1, "pair dataset column '" + name + "' lacks side prefix");
      }
    } else {
      record_cols.push_back(c);
    }
  }

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.row_lines[r];
    LabeledInstance inst;
    inst.id = make_id(prefix, r);
    inst.dataset = descriptor.id;
    inst.task = descriptor.task;

    switch (descriptor.task) {
      case TaskKind::ED: {
        inst.instance.role = RecordRole::SingleRecord;
        for (std::size_t c : record_cols)
          inst.instance.add(table.header[c], normalize_value(row[c]));
        inst.target_attribute = std::string(util::trim(row[target_col]));
        bool yes = false;
        if (!parse_binary_gold(row[label_col], yes))
          throw ParseError(line, "bad binary label: '" + row[label_col] + "'");
        inst.gold = Label::binary(yes);
        break;
      }
      case TaskKind::DI: {
        inst.instance.role = RecordRole::SingleRecord;
        for (std::size_t c : record_cols) {
          if (c == di_gold_col || table.header[c] == descriptor.target_attribute) continue;
          inst.instance.add(table.header[c], normalize_value(row[c]));
        }
        inst.target_attribute = descriptor.target_attribute;
        inst.gold = Label::value(std::string(util::trim(row[di_gold_col])));
        break;
      }
      case TaskKind::SM:
      case TaskKind::EM: {
        inst.instance.role = RecordRole::Pair;
        for (std::size_t c : left_cols) {
          inst.instance.add(table.header[c].substr(descriptor.pair_left_prefix.size()),
                            normalize_value(row[c]));
        }
        inst.instance.pair_split = inst.instance.attributes.size();
        for (std::size_t c : right_cols) {
          inst.instance.add(table.header[c].substr(descriptor.pair_right_prefix.size()),
                            normalize_value(row[c]));
        }
        bool yes = false;
        if (!parse_binary_gold(row[label_col], yes))
          throw ParseError(line, "bad binary label: '" + row[label_col] + "'");
        inst.gold = Label::binary(yes);
        break;
      }
      case TaskKind::AVE: {
        inst.instance.role = RecordRole::TextDescription;
        inst.instance.add(descriptor.description_field,
                          AttributeValue::text(std::string(util::trim(row[desc_col]))));
        inst.instance.add(descriptor.attribute_field,
                          AttributeValue::text(std::string(util::trim(row[attr_col]))));
        inst.gold = Label::value(std::string(util::trim(row[label_col])));
        break;
      }
      case TaskKind::CTA:
        break;  // unreachable
    }

    try {
      validate_labeled(inst);
    } catch (const InvalidInstance& e) {
      throw ParseError(line, e.what());
    }
    dataset.instances.push_back(std::move(inst));
  }

  dataset.split_of.assign(dataset.instances.size(), Split::Train);
  return dataset;
}

namespace {

std::string csv_escape(const std::string& field, char delimiter) {
  bool needs_quotes = field.find(delimiter) != std::string::npos ||
                      field.find('"') != std::string::npos ||
                      field.find('\n') != std::string::npos ||
                      field.find('\r') != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

}  // namespace

void write_table(const Dataset& dataset, const std::filesystem::path& path) {
  const DatasetDescriptor& d = dataset.descriptor;
  if (dataset.instances.empty()) throw Error("refusing to write empty dataset");

  std::vector<std::string> header;
  const LabeledInstance& first = dataset.instances.front();
  const bool is_pair = d.task == TaskKind::SM || d.task == TaskKind::EM;
  if (is_pair) {
    for (std::size_t i = 0; i < first.instance.attributes.size(); ++i) {
      const std::string& name = first.instance.attributes[i].first;
      header.push_back((i < first.instance.pair_split ? d.pair_left_prefix
                                                      : d.pair_right_prefix) +
                       name);
    }
    header.push_back(d.label_field);
  } else if (d.task == TaskKind::ED) {
    for (const auto& [name, _] : first.instance.attributes) header.push_back(name);
    header.push_back(d.target_field);
    header.push_back(d.label_field);
  } else if (d.task == TaskKind::DI) {
    for (const auto& [name, _] : first.instance.attributes) header.push_back(name);
    header.push_back(d.target_attribute);
  } else if (d.task == TaskKind::AVE) {
    header = {d.description_field, d.attribute_field, d.label_field};
  } else {
    throw Error("write_table does not handle this task");
  }

  std::string out;
  auto emit_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(d.delimiter);
      out += csv_escape(row[i], d.delimiter);
    }
    out.push_back('\n');
  };
  emit_row(header);

  for (const LabeledInstance& inst : dataset.instances) {
    std::vector<std::string> row;
    if (d.task == TaskKind::AVE) {
      const auto* desc = inst.instance.find(d.description_field);
      const auto* attr = inst.instance.find(d.attribute_field);
      row = {desc ? desc->rendered() : "", attr ? attr->rendered() : "",
             inst.gold ? inst.gold->rendered() : ""};
    } else {
      if (inst.instance.attributes.size() != first.instance.attributes.size())
        throw Error("instance " + inst.id + " attribute count differs from header");
      if (!inst.gold) throw Error("instance " + inst.id + " has no gold label to write");
      for (const auto& [_, value] : inst.instance.attributes) row.push_back(value.rendered());
      if (d.task == TaskKind::ED) row.push_back(*inst.target_attribute);
      row.push_back(inst.gold->rendered());
    }
    emit_row(row);
  }
  util::write_file(path, out);
}

std::array<std::vector<std::size_t>, 3> apply_split(Dataset& dataset) {
  const SplitProtocol& protocol = dataset.descriptor.split;
  if (protocol.kind == SplitProtocol::Kind::SeededFraction) {
    const SplitFractions& f = protocol.fractions;
    if (f.train < 0 || f.valid < 0 || f.test < 0 ||
        std::abs(f.train + f.valid + f.test - 1.0) > 1e-9)
      throw Error("split fractions must be non-negative and sum to 1");

    const std::size_t n = dataset.instances.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 gen(f.seed);
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(gen() % i);
      std::swap(order[i - 1], order[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n)));
    const auto n_valid = static_cast<std::size_t>(std::floor(f.valid * static_cast<double>(n)));
    dataset.split_of.assign(n, Split::Test);
    for (std::size_t i = 0; i < n_train && i < n; ++i) dataset.split_of[order[i]] = Split::Train;
    for (std::size_t i = n_train; i < n_train + n_valid && i < n; ++i)
      dataset.split_of[order[i]] = Split::Valid;
  }
  return {dataset.indices(Split::Train), dataset.indices(Split::Valid),
          dataset.indices(Split::Test)};
}

namespace {

DatasetDescriptor make_descriptor(std::string id, TaskKind task, std::string domain) {
  DatasetDescriptor d;
  d.id = std::move(id);
  d.task = task;
  d.domain_tag = std::move(domain);
  return d;
}

std::vector<DatasetDescriptor> build_registry() {
  using serializer::PromptProfile;
  std::vector<DatasetDescriptor> all;

  {  // ED
    DatasetDescriptor d = make_descriptor("adult", TaskKind::ED, "census");
    d.prompt.attribute_phrase =
        "age, workclass, education, marital status, occupation, relationship, race, sex, "
        "hours per week, country, and income";
    all.push_back(d);
    all.push_back(make_descriptor("hospital", TaskKind::ED, "health"));
    all.push_back(make_descriptor("flights", TaskKind::ED, "flight"));
    all.push_back(make_descriptor("rayyan", TaskKind::ED, "publication"));
  }
  {  // DI
    DatasetDescriptor d = make_descriptor("buy", TaskKind::DI, "product");
    d.target_attribute = "manufacturer";
    d.prompt.record_noun = "product";
    d.prompt.target_noun = "manufacturer";
    d.prompt.target_display = "manufacturer";
    d.prompt.answer_instruction = "Answer the name of the manufacturer.";
    all.push_back(d);

    d = make_descriptor("restaurant", TaskKind::DI, "restaurant");
    d.target_attribute = "city";
    d.prompt.record_noun = "restaurant";
    d.prompt.target_noun = "city";
    d.prompt.target_display = "City";
    d.prompt.field_hint = "'Name', 'Address', 'Phone', and 'Type'";
    d.prompt.answer_instruction = "Answer the name of the city.";
    all.push_back(d);

    d = make_descriptor("flipkart", TaskKind::DI, "product");
    d.target_attribute = "brand";
    d.prompt.record_noun = "product";
    d.prompt.target_noun = "brand";
    d.prompt.target_display = "brand";
    d.prompt.answer_instruction = "Answer the name of the brand.";
    all.push_back(d);

    d = make_descriptor("phone", TaskKind::DI, "product");
    d.target_attribute = "brand";
    d.prompt.record_noun = "cellphone";
    d.prompt.target_noun = "brand";
    d.prompt.target_display = "brand";
    d.prompt.answer_instruction = "Answer the name of the brand.";
    all.push_back(d);
  }
  {  // SM
    all.push_back(make_descriptor("mimic-iii", TaskKind::SM, "medical"));
    all.push_back(make_descriptor("synthea", TaskKind::SM, "medical"));
    all.push_back(make_descriptor("cms", TaskKind::SM, "medical"));
  }
  {  // EM
    auto em = [&](std::string id, std::string domain, std::string noun) {
      DatasetDescriptor d = make_descriptor(std::move(id), TaskKind::EM, std::move(domain));
      d.prompt.pair_noun = std::move(noun);
      all.push_back(d);
    };
    em("amazon-google", "software", "Product");
    em("beer", "product", "Product");
    em("dblp-acm", "publication", "Article");
    em("dblp-googlescholar", "publication", "Article");
    em("fodors-zagats", "restaurant", "Restaurant");
    em("itunes-amazon", "music", "Song");
    em("abt-buy", "product", "Product");
    em("walmart-amazon", "product", "Product");
  }
  all.push_back(make_descriptor("sotab", TaskKind::CTA, "web tables"));
  {  // AVE
    all.push_back(make_descriptor("ae-110k", TaskKind::AVE, "product"));
    all.push_back(make_descriptor("oa-mine", TaskKind::AVE, "product"));
  }
  return all;
}

}  // namespace

const std::vector<DatasetDescriptor>& builtin_datasets() {
  static const std::vector<DatasetDescriptor> registry = build_registry();
  return registry;
}

DatasetDescriptor registry_lookup(const std::string& id) {
  for (const DatasetDescriptor& d : builtin_datasets()) {
    if (d.id == id) return d;
  }
  throw UnknownDataset("unknown dataset: " + id);
}

namespace {

void apply_manifest(DatasetDescriptor& d, const nlohmann::json& doc) {
  if (doc.contains("task")) {
    auto task = task_from_string(doc["task"].get<std::string>());
    if (!task) throw Error("manifest: unknown task");
    d.task = *task;
  }
  if (doc.contains("domain_tag")) d.domain_tag = doc["domain_tag"].get<std::string>();
  if (doc.contains("files")) {
    const auto& f = doc["files"];
    d.files.data = f.value("data", d.files.data);
    d.files.train = f.value("train", d.files.train);
    d.files.valid = f.value("valid", d.files.valid);
    d.files.test = f.value("test", d.files.test);
  }
  if (doc.contains("split")) {
    const auto& s = doc["split"];
    std::string kind = s.value("kind", "provided");
    if (kind == "provided") {
      d.split.kind = SplitProtocol::Kind::Provided;
    } else if (kind == "seeded" || kind == "seeded-fraction") {
      d.split.kind = SplitProtocol::Kind::SeededFraction;
      d.split.fractions.train = s.value("train", 0.6);
      d.split.fractions.valid = s.value("valid", 0.2);
      d.split.fractions.test = s.value("test", 0.2);
      d.split.fractions.seed = s.value("seed", 0);
    } else {
      throw Error("manifest: unknown split kind '" + kind + "'");
    }
  }
  if (doc.contains("delimiter")) {
    std::string delim = doc["delimiter"].get<std::string>();
    if (delim == "\\t" || delim == "tab") delim = "\t";
    if (delim.size() != 1) throw Error("manifest: delimiter must be one character");
    d.delimiter = delim[0];
  }
  d.label_field = doc.value("label_field", d.label_field);
  d.target_field = doc.value("target_field", d.target_field);
  d.target_attribute = doc.value("target_attribute", d.target_attribute);
  d.pair_left_prefix = doc.value("pair_left_prefix", d.pair_left_prefix);
  d.pair_right_prefix = doc.value("pair_right_prefix", d.pair_right_prefix);
  d.description_field = doc.value("description_field", d.description_field);
  d.attribute_field = doc.value("attribute_field", d.attribute_field);
  if (doc.contains("prompt")) {
    const auto& p = doc["prompt"];
    d.prompt.attribute_phrase = p.value("attribute_phrase", d.prompt.attribute_phrase);
    d.prompt.record_noun = p.value("record_noun", d.prompt.record_noun);
    d.prompt.target_noun = p.value("target_noun", d.prompt.target_noun);
    d.prompt.target_display = p.value("target_display", d.prompt.target_display);
    d.prompt.field_hint = p.value("field_hint", d.prompt.field_hint);
    d.prompt.answer_instruction = p.value("answer_instruction", d.prompt.answer_instruction);
    d.prompt.pair_noun = p.value("pair_noun", d.prompt.pair_noun);
  }
}

}  // namespace

DatasetDescriptor descriptor_from_manifest(const std::filesystem::path& manifest_path) {
  nlohmann::json doc = nlohmann::json::parse(util::read_file(manifest_path));
  if (!doc.contains("id")) throw Error("manifest missing 'id': " + manifest_path.string());
  const std::string id = doc["id"].get<std::string>();

  DatasetDescriptor d;
  try {
    d = registry_lookup(id);
  } catch (const UnknownDataset&) {
    d.id = id;
    if (!doc.contains("task"))
      throw Error("manifest for unknown dataset '" + id + "' must name a task");
  }
  apply_manifest(d, doc);
  return d;
}

Dataset load_dataset(const DatasetDescriptor& descriptor,
                     const std::filesystem::path& base_dir) {
  if (descriptor.split.kind == SplitProtocol::Kind::Provided) {
    Dataset out;
    out.descriptor = descriptor;
    auto append = [&](const std::string& file, Split split) {
      if (file.empty()) return;
      Dataset part = load_table(base_dir / file, descriptor,
                                descriptor.id + ":" + to_string(split));
      for (auto& inst : part.instances) {
        out.instances.push_back(std::move(inst));
        out.split_of.push_back(split);
      }
    };
    append(descriptor.files.train, Split::Train);
    append(descriptor.files.valid, Split::Valid);
    append(descriptor.files.test, Split::Test);
    if (out.instances.empty())
      throw Error("dataset '" + descriptor.id + "' has no split files");
    return out;
  }

  if (descriptor.files.data.empty())
    throw Error("dataset '" + descriptor.id + "' needs files.data for seeded splits");
  Dataset dataset = load_table(base_dir / descriptor.files.data, descriptor);
  apply_split(dataset);
  return dataset;
}

Dataset load_from_root(const std::filesystem::path& data_root, const std::string& id) {
  const auto manifest = data_root / id / "manifest.json";
  DatasetDescriptor d = descriptor_from_manifest(manifest);
  if (d.id != id)
    throw Error("manifest id '" + d.id + "' does not match directory '" + id + "'");
  return load_dataset(d, data_root / id);
}

std::vector<std::vector<std::string>> read_csv_columns(const std::filesystem::path& path,
                                                       char delimiter, bool has_header) {
  RawTable table = parse_csv(util::read_file(path.string()), delimiter);
  std::vector<std::vector<std::string>> columns(table.header.size());
  // parse_csv always treats the first row as header; put it back for
  // headerless tables.
  if (!has_header)
    for (std::size_t c = 0; c < table.header.size(); ++c) columns[c].push_back(table.header[c]);
  for (const auto& row : table.rows)
    for (std::size_t c = 0; c < row.size(); ++c) columns[c].push_back(row[c]);
  return columns;
}

}  // namespace dpkit::ingest
