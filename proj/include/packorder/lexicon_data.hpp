#pragma once

#include <array>
#include <string_view>

namespace packorder {

// Default reference lexicon; mirrors data/grocery_lexicon.txt.
inline constexpr std::array<std::string_view, 120> kDefaultGroceryLexicon{
    "apples", "bananas", "oranges", "lemons", "limes", "grapes", "strawberries", "blueberries",
    "raspberries", "pears", "peaches", "plums", "cherries", "pineapple", "mango", "kiwi",
    "watermelon", "melon", "avocado", "tomatoes", "potatoes", "onions", "garlic", "carrots",
    "cucumber", "bell pepper", "lettuce", "spinach", "broccoli", "cauliflower", "zucchini",
    "mushrooms", "celery", "cabbage", "corn", "green beans", "peas", "eggplant", "sweet potatoes",
    "ginger", "eggs", "milk", "butter", "cheese", "yogurt", "cream", "sour cream", "cottage cheese",
    "cream cheese", "mozzarella", "bread", "toast bread", "baguette", "bagels", "tortillas",
    "croissants", "muffins", "crackers", "cereal", "oatmeal", "rice", "pasta", "spaghetti",
    "noodles", "flour", "sugar", "salt", "pepper", "olive oil", "vegetable oil", "vinegar",
    "ketchup", "mustard", "mayonnaise", "honey", "jam", "peanut butter", "chocolate", "cookies",
    "chips", "pretzels", "popcorn", "nuts", "almonds", "coffee", "tea", "orange juice",
    "apple juice", "water bottle", "soda", "beer", "wine", "canned beans", "canned tomatoes",
    "canned corn", "canned tuna", "soup", "chicken", "beef", "pork", "ground beef", "sausages",
    "ham", "bacon", "salmon", "shrimp", "tofu", "frozen pizza", "frozen vegetables", "ice cream",
    "frozen fries", "dish soap", "toilet paper", "paper towels", "detergent", "shampoo",
    "toothpaste", "sponges", "broth", "baking soda",
};

}  // namespace packorder
