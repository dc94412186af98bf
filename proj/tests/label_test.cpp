#include "packorder/label.hpp"

#include <gtest/gtest.h>

namespace packorder {
namespace {

TEST(NormalizeLabel, LowercasesTrimsAndCollapsesWhitespace) {
  EXPECT_EQ(normalize_label("  Canned \t  Beans \n"), "canned beans");
  EXPECT_EQ(normalize_label("EGGS"), "eggs");
  EXPECT_EQ(normalize_label("   "), "");
}

TEST(MakeClassLabel, RejectsEmptyAndCommas) {
  EXPECT_EQ(make_class_label(" Bell  Pepper"), "bell pepper");
  try {
    make_class_label("  ");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::invalid_input);
  }
  EXPECT_THROW(make_class_label("apples, bananas"), Error);
}

TEST(CharLength, CountsCodePoints) {
  EXPECT_EQ(char_length("eggs"), 4u);
  EXPECT_EQ(char_length("jalape\xC3\xB1o"), 8u);  // jalapeño
  EXPECT_EQ(char_length(""), 0u);
}

TEST(ClassCatalog, ResolvesAliasesAndPlurals) {
  ClassCatalog c({"apples", "bell pepper", "tomatoes", "bottle"}, {{"Water Bottle", "bottle"}});
  EXPECT_EQ(c.resolve("Apples"), 0u);
  EXPECT_EQ(c.resolve("apple"), 0u);
  EXPECT_EQ(c.resolve("tomato"), 2u);
  EXPECT_EQ(c.resolve("bell peppers"), 1u);
  EXPECT_EQ(c.resolve("water  bottle"), 3u);
  EXPECT_EQ(c.resolve("water bottles"), 3u);
  EXPECT_FALSE(c.resolve("dragonfruit"));
  EXPECT_FALSE(c.resolve(""));
}

TEST(ClassCatalog, AddIsIdempotentAndKeepsOrder) {
  ClassCatalog c;
  EXPECT_EQ(c.add("Milk"), 0u);
  EXPECT_EQ(c.add("eggs"), 1u);
  EXPECT_EQ(c.add(" MILK "), 0u);
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.name(1), "eggs");
}

}  // namespace
}  // namespace packorder
