//! Annotated mini-language sources that accompany the registered contracts.

const ACCOUNT: &str = r"contract Account {

  int balance; // invariant balance >= 0;

  // requires amount >= 0
  // ensures balance == amount
  Account(int amount) { balance = amount; }

  // requires amount > 0 && amount <= other
  // ensures balance == \old(balance) + amount
  //   && \result == other - amount;
  int transfer(int amount, int other) { other -= amount; deposit(amount); return other; }

  // requires amount > 0 && amount <= balance
  // ensures balance == \old(balance) - amount
  void withdraw(int amount) { balance -= amount; }

  // requires amount > 0;
  // ensures balance == \old(balance) + amount
  void deposit(int amount) { balance += amount; }

  // ensures \result == balance
  int balance() { return balance; }
}
";

/// The threshold body of the registered contract, with a provable postcondition.
const CROWDFUND: &str = r"contract Crowdfunding {

    int minimum = 1000;

    // requires 0 < n && n <= inputs.length
    // ensures \result == 0 || \result >= minimum
    public int crowdfund(int n, int[] inputs) {
      int sum = 0;
      // invariant 0 <= i && i <= n
      for (int i = 0; i < n; i++) {
        sum += inputs[i];
      }
      if (sum >= minimum) {
        return sum;
      }
      return 0;
    }
}
";

/// The same body under the stronger postcondition `\result >= minimum`, which
/// fails whenever the target is missed.
const CROWDFUND_CASE_STUDY: &str = r"contract Crowdfunding {

    int minimum = 1000;

    // requires 0 < n && n <= inputs.length
    // ensures \result >= minimum
    public int crowdfund(int n, int[] inputs) {
      int sum = 0;
      // invariant 0 <= i && i <= n
      for (int i = 0; i < n; i++) {
        sum += inputs[i];
      }
      if (sum >= minimum) {
        return sum;
      }
      return 0;
    }
}
";

/// The case-study listing as printed: the raw sum is returned.
const CROWDFUND_LISTING: &str = r"class Crowdfunding {

    int minimum = 1000;

    // requires 0 < n
    // ensures \result >= minimum
    public int crowdfund(int n, int[] inputs) {
      int sum = 0;
      // invariant 0 <= i && i <= n
      for (int i = 0; i < n; i++) {
        sum += inputs[i];
      }
      return sum;
    }
}
";

const MILLIONAIRE: &str = r"contract Millionaire {

  // ensures \result == 0 || \result == 1
  // ensures (\result == 1) == (y > x)
  int millionaire(int x, int y) {
    if (y > x) {
      return 1;
    }
    return 0;
  }
}
";

const SECOND_PRICE_AUCTION: &str = r"contract SecondPriceAuction {

  // ensures (b0 >= \result && b1 >= \result) || (b0 >= \result && b2 >= \result) || (b1 >= \result && b2 >= \result)
  // ensures !(b0 > \result && b1 > \result) && !(b0 > \result && b2 > \result) && !(b1 > \result && b2 > \result)
  int price(int b0, int b1, int b2) {
    int hi = b0;
    int lo = b1;
    if (b1 > b0) {
      hi = b1;
      lo = b0;
    }
    if (b2 > hi) {
      lo = hi;
      hi = b2;
    } else {
      if (b2 > lo) {
        lo = b2;
      }
    }
    return lo;
  }
}
";

pub const ANNOTATED_SOURCES: [(&str, &str); 6] = [
    ("account", ACCOUNT),
    ("crowdfund", CROWDFUND),
    ("crowdfund_case_study", CROWDFUND_CASE_STUDY),
    ("crowdfund_listing", CROWDFUND_LISTING),
    ("millionaire", MILLIONAIRE),
    ("second_price_auction", SECOND_PRICE_AUCTION),
];

pub fn annotated_source(name: &str) -> Option<&'static str> {
    ANNOTATED_SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
