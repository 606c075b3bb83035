#include "dpkit/knowledge.hpp"

// Embedded copy of data/knowledge/default.json. A test asserts the two stay
// byte-identical.

namespace dpkit::knowledge {

const char* Registry::builtin_json() {
  static const char kJson[] = R"__dpk__({
  "rules": [
    {
      "id": "general.missing-not-basis",
      "scope": "general",
      "text": "Missing values (N/A or \"nan\") should not be used as a basis for your decision.",
      "rank": 0,
      "default": false
    },
    {
      "id": "general.missing-inference",
      "scope": "general",
      "text": "If there are missing values, you should make inferences based only on the information that is available.",
      "rank": 1,
      "default": false
    },
    {
      "id": "general.missing-note",
      "scope": "general",
      "tasks": ["em"],
      "text": "Note that missing values (N/A or \"nan\") should not be used as a basis for your decision.",
      "rank": 0
    },
    {
      "id": "ed.error-types.record",
      "scope": "task",
      "task": "ed",
      "text": "Errors may include, but are not limited to, spelling errors, inconsistencies, or values that don't make sense given the context of the whole record.",
      "rank": 0
    },
    {
      "id": "ed.error-types.attribute",
      "scope": "task",
      "task": "ed",
      "text": "Errors can include, but are not limited to, spelling errors, inconsistencies, or values that don't make sense for that attribute.",
      "rank": 0,
      "default": false
    },
    {
      "id": "ed.capitalization",
      "scope": "task",
      "task": "ed",
      "text": "Capitalization should not be a factor in deciding whether there is an error or not.",
      "rank": 1,
      "default": false
    },
    {
      "id": "ed.missing-not-error",
      "scope": "task",
      "task": "ed",
      "variant_group": "ed-missing-policy",
      "policy": "missing-not-error",
      "text": "Note that values such as 'nan' and 'N/A' mean missing vaules, and they are not considered as errors.",
      "rank": 10
    },
    {
      "id": "ed.missing-is-error",
      "scope": "task",
      "task": "ed",
      "variant_group": "ed-missing-policy",
      "policy": "missing-is-error",
      "text": "Note that values such as 'nan' and 'N/A' mean missing values, and they ARE errors.",
      "rank": 10
    },
    {
      "id": "em.acronyms",
      "scope": "task",
      "task": "em",
      "text": "To determine if two values are identical, you need to examine both their full names and corresponding acronyms.",
      "rank": 1,
      "default": false
    },
    {
      "id": "adult.integer-ranges",
      "scope": "dataset",
      "dataset": "adult",
      "text": "Both the 'age' attribute and the 'hoursperweek' attribute can represent a range of integer values.",
      "rank": 0
    },
    {
      "id": "adult.attribute-consistency",
      "scope": "dataset",
      "dataset": "adult",
      "text": "Verify the consistency of target attribute with related attributes to identify any errors.",
      "rank": 1
    },
    {
      "id": "hospital.score-percentage",
      "scope": "dataset",
      "dataset": "hospital",
      "text": "The value of attribute \"score\" can be a percentage number.",
      "rank": 0
    },
    {
      "id": "restaurant.city-deduction",
      "scope": "dataset",
      "dataset": "restaurant",
      "text": "The city can often be deduced from the area code of the phone number and the specific street name.",
      "rank": 0
    },
    {
      "id": "amazon-google.editions",
      "scope": "dataset",
      "dataset": "amazon-google",
      "text": "Different editions, versions, or operating systems for the same software are all considered as different products.",
      "rank": 0
    },
    {
      "id": "amazon-google.product-numbers",
      "scope": "dataset",
      "dataset": "amazon-google",
      "text": "You should compare the two product numbers first.",
      "rank": 1
    },
    {
      "id": "beer.parent-company",
      "scope": "dataset",
      "dataset": "beer",
      "text": "Note that different factories can belong to the same parent company.",
      "rank": 0
    },
    {
      "id": "beer.company-in-name",
      "scope": "dataset",
      "dataset": "beer",
      "text": "The company name of Product B may occur in its product name.",
      "rank": 1
    },
    {
      "id": "beer.production-process",
      "scope": "dataset",
      "dataset": "beer",
      "text": "Beverages that undergo different production processes, such as the use of various types of wood in the barrelling process, may be considered distinct products.",
      "rank": 2
    },
    {
      "id": "fodors-zagats.type-variance",
      "scope": "dataset",
      "dataset": "fodors-zagats",
      "text": "The type of a specific restaurant might vary between different datasets.",
      "rank": 0
    },
    {
      "id": "itunes-amazon.song-length",
      "scope": "dataset",
      "dataset": "itunes-amazon",
      "text": "The length of the same song might vary slightly across different datasets due to rounding or data entry discrepancies.",
      "rank": 0
    },
    {
      "id": "dblp-acm.author-formats",
      "scope": "dataset",
      "dataset": "dblp-acm",
      "text": "The names of authors might be presented in various formats or sequences, even when referring to the same article.",
      "rank": 0
    },
    {
      "id": "dblp-googlescholar.author-formats",
      "scope": "dataset",
      "dataset": "dblp-googlescholar",
      "text": "The names of authors might be presented in various formats or sequences, even when referring to the same article.",
      "rank": 0
    }
  ]
}
)__dpk__";
  return kJson;
}

}  // namespace dpkit::knowledge
