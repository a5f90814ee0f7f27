#include <cctype>
#include <cmath>
#include <sstream>

#include "qccs/syntax.hpp"

namespace qccs::syntax {

namespace {

enum class Tok { End, Ident, Keyword, Int, Float, String, Punct };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  long long int_val = 0;
  double float_val = 0;
  int line = 1, col = 1;
};

const std::set<std::string> kKeywords = {
    "qubits",  "channel", "qchannel",      "superop", "measurement", "relabel",
    "def",     "main",    "nil",           "tau",     "if",          "then",
    "else",    "true",    "false",         "not",     "and",         "or",
    "on",      "gate",    "set",           "setplus", "dephase",     "kraus",
    "computational", "inbasis", "projectors", "labels", "cmp",       "substr",
    "remstr",  "len",     "bits",          "hadamard"};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }
  const Token& peek2() {
    if (!has2_) {
      saved_ = tok_;
      size_t save_pos = pos_;
      int save_line = line_, save_col = col_;
      advance();
      tok2_ = tok_;
      tok_ = saved_;
      pos_ = save_pos;
      line_ = save_line;
      col_ = save_col;
      has2_ = true;
    }
    return tok2_;
  }

  Token next() {
    Token t = tok_;
    if (has2_) {
      // Re-lex from the stored position to stay consistent.
      has2_ = false;
    }
    advance();
    return t;
  }

  [[noreturn]] void error(const std::string& msg) const {
    fail_parse("parse error at line " + std::to_string(tok_.line) + ", column " +
               std::to_string(tok_.col) + ": " + msg);
  }

 private:
  void advance() {
    has2_ = false;
    skip_space();
    tok_ = Token{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Tok::End;
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string word;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' ||
              src_[pos_] == '\'')) {
        word.push_back(src_[pos_]);
        bump();
      }
      tok_.kind = kKeywords.count(word) ? Tok::Keyword : Tok::Ident;
      tok_.text = word;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string num;
      bool is_float = false;
      while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E' ||
                                    ((src_[pos_] == '+' || src_[pos_] == '-') && pos_ > 0 &&
                                     (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E')))) {
        if (src_[pos_] == '.') {
          // A dot starts a float only when followed by a digit; otherwise it
          // is the prefix separator.
          if (pos_ + 1 >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))
            break;
          is_float = true;
        }
        if (src_[pos_] == 'e' || src_[pos_] == 'E') {
          if (pos_ + 1 >= src_.size() ||
              (!std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])) && src_[pos_ + 1] != '+' &&
               src_[pos_ + 1] != '-'))
            break;
          is_float = true;
        }
        num.push_back(src_[pos_]);
        bump();
      }
      if (is_float) {
        tok_.kind = Tok::Float;
        tok_.float_val = std::stod(num);
      } else {
        tok_.kind = Tok::Int;
        tok_.int_val = std::stoll(num);
      }
      tok_.text = num;
      return;
    }
    if (c == '"') {
      bump();
      std::string s;
      while (pos_ < src_.size() && src_[pos_] != '"') {
        s.push_back(src_[pos_]);
        bump();
      }
      if (pos_ >= src_.size()) fail_parse("unterminated string literal");
      bump();
      tok_.kind = Tok::String;
      tok_.text = s;
      return;
    }
    // multi-character punctuation
    static const std::vector<std::string> multi = {"||", "->", ">=", "<=", "!=", "(+)"};
    for (const auto& m : multi) {
      if (src_.compare(pos_, m.size(), m) == 0) {
        tok_.kind = Tok::Punct;
        tok_.text = m;
        for (size_t i = 0; i < m.size(); ++i) bump();
        return;
      }
    }
    tok_.kind = Tok::Punct;
    tok_.text = std::string(1, c);
    bump();
  }

  void skip_space() {
    for (;;) {
      while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) bump();
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') bump();
        continue;
      }
      break;
    }
  }

  void bump() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_, tok2_, saved_;
  bool has2_ = false;
};

class Parser {
 public:
  Parser(const std::string& src, Defs* defs) : lex_(src), defs_(defs) {}

  Module parse_module() {
    Module mod;
    defs_ = &mod.defs;
    while (lex_.peek().kind != Tok::End) {
      const Token& t = lex_.peek();
      if (t.kind != Tok::Keyword) lex_.error("expected a declaration, found '" + t.text + "'");
      if (t.text == "qubits")
        parse_qubits();
      else if (t.text == "channel")
        parse_channel();
      else if (t.text == "qchannel")
        parse_qchannel();
      else if (t.text == "superop")
        parse_superop();
      else if (t.text == "measurement")
        parse_measurement();
      else if (t.text == "relabel")
        parse_relabel();
      else if (t.text == "def")
        parse_def();
      else if (t.text == "main") {
        lex_.next();
        expect_punct("=");
        mod.main = parse_proc();
        expect_punct(";");
      } else {
        lex_.error("unexpected keyword '" + t.text + "' at declaration level");
      }
    }
    return mod;
  }

  TermPtr parse_single_term() {
    TermPtr t = parse_proc();
    if (lex_.peek().kind != Tok::End) lex_.error("trailing input after process term");
    return t;
  }

 private:
  Lexer lex_;
  Defs* defs_;

  // --- helpers ---

  void expect_punct(const std::string& p) {
    if (lex_.peek().kind != Tok::Punct || lex_.peek().text != p)
      lex_.error("expected '" + p + "', found '" + lex_.peek().text + "'");
    lex_.next();
  }
  bool accept_punct(const std::string& p) {
    if (lex_.peek().kind == Tok::Punct && lex_.peek().text == p) {
      lex_.next();
      return true;
    }
    return false;
  }
  bool accept_keyword(const std::string& k) {
    if (lex_.peek().kind == Tok::Keyword && lex_.peek().text == k) {
      lex_.next();
      return true;
    }
    return false;
  }
  void expect_keyword(const std::string& k) {
    if (!accept_keyword(k)) lex_.error("expected '" + k + "'");
  }
  std::string expect_ident() {
    if (lex_.peek().kind != Tok::Ident) lex_.error("expected an identifier, found '" + lex_.peek().text + "'");
    return lex_.next().text;
  }
  long long expect_int() {
    if (lex_.peek().kind != Tok::Int) lex_.error("expected an integer");
    return lex_.next().int_val;
  }
  std::string expect_string() {
    if (lex_.peek().kind != Tok::String) lex_.error("expected a string literal");
    return lex_.next().text;
  }

  double signed_number() {
    double sign = 1.0;
    while (accept_punct("-")) sign = -sign;
    const Token& t = lex_.peek();
    if (t.kind == Tok::Int) return sign * static_cast<double>(lex_.next().int_val);
    if (t.kind == Tok::Float) return sign * lex_.next().float_val;
    lex_.error("expected a number");
  }

  // --- declarations ---

  void parse_qubits() {
    lex_.next();
    std::vector<std::string> names;
    while (lex_.peek().kind == Tok::Ident) names.push_back(lex_.next().text);
    expect_punct(";");
    if (!defs_->reg.vars().empty()) lex_.error("register already declared");
    try {
      defs_->reg = qlin::QReg(names);
    } catch (const Error& e) {
      lex_.error(e.what());
    }
  }

  Value parse_value() {
    if (lex_.peek().kind == Tok::String) return Value::bits(lex_.next().text);
    bool neg = accept_punct("-");
    long long num = expect_int();
    long long den = 1;
    if (accept_punct("/")) den = expect_int();
    return Value(Rational(neg ? -num : num, den));
  }

  void parse_channel() {
    lex_.next();
    std::string name = expect_ident();
    expect_punct(":");
    std::vector<Value> domain;
    if (accept_keyword("bits")) {
      expect_punct("(");
      bool le = accept_punct("<=");
      long long n = expect_int();
      expect_punct(")");
      long long lo = le ? 0 : n;
      for (long long len = lo; len <= n; ++len)
        for (long long v = 0; v < (1LL << len); ++v) {
          Bits b;
          for (long long i = len - 1; i >= 0; --i) b.push_back((v >> i) & 1 ? 1 : 0);
          domain.push_back(Value(b));
        }
    } else {
      expect_punct("{");
      domain.push_back(parse_value());
      while (accept_punct(",")) domain.push_back(parse_value());
      expect_punct("}");
    }
    expect_punct(";");
    if (!defs_->channels.emplace(name, std::move(domain)).second)
      lex_.error("channel redeclared: " + name);
  }

  void parse_qchannel() {
    lex_.next();
    while (lex_.peek().kind == Tok::Ident) defs_->qchannels.insert(lex_.next().text);
    expect_punct(";");
  }

  qlin::CMatrix parse_matrix() {
    expect_punct("[");
    std::vector<std::vector<qlin::Complex>> rows;
    do {
      std::vector<qlin::Complex> row;
      do {
        if (accept_punct("(")) {
          double re = signed_number();
          expect_punct(",");
          double im = signed_number();
          expect_punct(")");
          row.emplace_back(re, im);
        } else {
          row.emplace_back(signed_number(), 0.0);
        }
      } while (accept_punct(","));
      rows.push_back(std::move(row));
    } while (accept_punct(";"));
    expect_punct("]");
    size_t cols = rows[0].size();
    qlin::CMatrix m(static_cast<long>(rows.size()), static_cast<long>(cols));
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != cols) lex_.error("ragged matrix literal");
      for (size_t j = 0; j < cols; ++j) m(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
    }
    return m;
  }

  void parse_superop() {
    lex_.next();
    std::string name = expect_ident();
    expect_keyword("on");
    int arity = static_cast<int>(expect_int());
    expect_punct("=");
    SuperDef def;
    def.arity = arity;
    if (accept_keyword("gate")) {
      std::string g = expect_ident();
      const qlin::CMatrix* m = qlin::gates::by_name(g);
      if (!m) lex_.error("unknown gate: " + g);
      def.kraus = {*m};
    } else if (accept_keyword("set")) {
      std::string pattern = expect_string();
      if (static_cast<int>(pattern.size()) != arity) lex_.error("set pattern length mismatch");
      std::vector<std::string> dummy;
      for (int i = 0; i < arity; ++i) dummy.push_back("u" + std::to_string(i));
      def.kraus = qlin::SuperOp::set_to(dummy, pattern).kraus();
    } else if (accept_keyword("setplus")) {
      long long n = expect_int();
      if (static_cast<int>(n) != arity) lex_.error("setplus arity mismatch");
      std::vector<std::string> dummy;
      for (int i = 0; i < arity; ++i) dummy.push_back("u" + std::to_string(i));
      def.kraus = qlin::SuperOp::set_to(dummy, std::string(static_cast<size_t>(n), '+')).kraus();
    } else if (accept_keyword("hadamard")) {
      // H on the qubits flagged 1 in the pattern, identity elsewhere.
      std::string pattern = expect_string();
      if (static_cast<int>(pattern.size()) != arity) lex_.error("hadamard pattern length mismatch");
      qlin::CMatrix m(1, 1);
      m(0, 0) = 1.0;
      for (char c : pattern)
        m = qlin::tensor(m, c == '1' ? qlin::gates::H() : qlin::gates::I(2));
      def.kraus = {m};
    } else if (accept_keyword("dephase")) {
      if (arity != 1) lex_.error("dephase acts on one qubit");
      def.kraus = qlin::SuperOp::dephase("u0").kraus();
    } else if (accept_keyword("kraus")) {
      expect_punct("{");
      do {
        def.kraus.push_back(parse_matrix());
      } while (accept_punct(","));
      expect_punct("}");
    } else {
      lex_.error("expected a super-operator constructor");
    }
    expect_punct(";");
    // Validate shape and trace preservation via the qlin constructor.
    try {
      std::vector<std::string> dummy;
      for (int i = 0; i < arity; ++i) dummy.push_back("u" + std::to_string(i));
      qlin::SuperOp probe(dummy, def.kraus);
      (void)probe;
    } catch (const Error& e) {
      lex_.error(std::string("super-operator ") + name + ": " + e.what());
    }
    if (!defs_->superops.emplace(name, std::move(def)).second)
      lex_.error("super-operator redeclared: " + name);
  }

  void parse_measurement() {
    lex_.next();
    std::string name = expect_ident();
    expect_keyword("on");
    int arity = static_cast<int>(expect_int());
    expect_punct("=");
    MeasDef def;
    def.arity = arity;
    long d = 1L << arity;
    if (accept_keyword("computational")) {
      bool bit_labels = false;
      if (accept_keyword("labels")) {
        expect_keyword("bits");
        bit_labels = true;
      }
      for (long m = 0; m < d; ++m) {
        qlin::CMatrix p = qlin::CMatrix::Zero(d, d);
        p(m, m) = 1.0;
        Value label = bit_labels ? bits_value(m, arity) : Value(Rational(m));
        def.outcomes.push_back({label, std::move(p)});
      }
    } else if (accept_keyword("inbasis")) {
      // Per-qubit basis string: 0 measures in {|0>,|1>}, 1 in {|+>,|->}.
      std::string basis = expect_string();
      if (static_cast<int>(basis.size()) != arity) lex_.error("inbasis string length mismatch");
      for (long m = 0; m < d; ++m) {
        std::string pattern;
        for (int k = 0; k < arity; ++k) {
          bool one = (m >> (arity - 1 - k)) & 1;
          pattern.push_back(basis[static_cast<size_t>(k)] == '0' ? (one ? '1' : '0')
                                                                 : (one ? '-' : '+'));
        }
        qlin::CVector v = qlin::gates::ket_string(pattern);
        def.outcomes.push_back({bits_value(m, arity), v * v.adjoint()});
      }
    } else if (accept_keyword("projectors")) {
      expect_punct("{");
      do {
        Value label = parse_value();
        expect_punct(":");
        def.outcomes.push_back({label, parse_matrix()});
      } while (accept_punct(","));
      expect_punct("}");
    } else {
      lex_.error("expected a measurement constructor");
    }
    expect_punct(";");
    validate_measurement(def);
    if (!defs_->measurements.emplace(name, std::move(def)).second)
      lex_.error("measurement redeclared: " + name);
  }

  static Value bits_value(long m, int width) {
    Bits b;
    for (int i = width - 1; i >= 0; --i) b.push_back((m >> i) & 1 ? 1 : 0);
    return Value(b);
  }

  void validate_measurement(const MeasDef& def) {
    try {
      std::vector<std::string> dummy;
      for (int i = 0; i < def.arity; ++i) dummy.push_back("u" + std::to_string(i));
      std::vector<qlin::ProjMeasurement::Outcome> outs;
      for (size_t i = 0; i < def.outcomes.size(); ++i)
        outs.push_back({static_cast<double>(i), def.outcomes[i].projector});
      qlin::ProjMeasurement probe(dummy, outs);
      (void)probe;
    } catch (const Error& e) {
      lex_.error(e.what());
    }
    for (size_t i = 0; i < def.outcomes.size(); ++i)
      for (size_t j = 0; j < i; ++j)
        if (def.outcomes[i].label == def.outcomes[j].label)
          lex_.error("measurement outcome labels must be pairwise distinct");
  }

  void parse_relabel() {
    lex_.next();
    std::string name = expect_ident();
    expect_punct("{");
    RelabelFn fn;
    do {
      std::string from = expect_ident();
      expect_punct("->");
      std::string to = expect_ident();
      bool from_classical = defs_->is_classical_chan(from);
      bool from_quantum = defs_->is_quantum_chan(from);
      if (!from_classical && !from_quantum) lex_.error("relabelling an undeclared channel: " + from);
      if (from_classical && !defs_->is_classical_chan(to))
        lex_.error("relabelling must map classical channels to classical channels");
      if (from_quantum && !defs_->is_quantum_chan(to))
        lex_.error("relabelling must map quantum channels to quantum channels");
      fn.mapping[from] = to;
    } while (accept_punct(","));
    expect_punct("}");
    accept_punct(";");
    if (!defs_->relabels.emplace(name, std::move(fn)).second)
      lex_.error("relabelling function redeclared: " + name);
  }

  void parse_def() {
    lex_.next();
    std::string name = expect_ident();
    expect_punct("(");
    ConstDef def;
    while (lex_.peek().kind == Tok::Ident) {
      def.qparams.push_back(lex_.next().text);
      if (!accept_punct(",")) break;
    }
    expect_punct(";");
    while (lex_.peek().kind == Tok::Ident) {
      def.cparams.push_back(lex_.next().text);
      if (!accept_punct(",")) break;
    }
    expect_punct(")");
    expect_punct("=");
    def.body = parse_proc();
    expect_punct(";");
    if (!defs_->constants.emplace(name, std::move(def)).second)
      lex_.error("process constant redefined: " + name);
  }

  // --- processes ---

  TermPtr parse_proc() { return parse_par(); }

  TermPtr parse_par() {
    TermPtr t = parse_sum();
    while (lex_.peek().kind == Tok::Punct && lex_.peek().text == "||") {
      lex_.next();
      t = mk_par(std::move(t), parse_sum());
    }
    return t;
  }

  TermPtr parse_sum() {
    TermPtr t = parse_prefix();
    while (lex_.peek().kind == Tok::Punct && lex_.peek().text == "+") {
      lex_.next();
      t = mk_sum(std::move(t), parse_prefix());
    }
    return t;
  }

  TermPtr parse_prefix() {
    const Token& t = lex_.peek();
    if (t.kind == Tok::Keyword) {
      if (t.text == "nil") return parse_postfix();
      if (t.text == "tau") {
        lex_.next();
        expect_punct(".");
        return mk_tau(parse_prefix());
      }
      if (t.text == "if") {
        lex_.next();
        BExprPtr guard = parse_bexpr();
        expect_keyword("then");
        TermPtr body = parse_prefix();
        if (accept_keyword("else")) {
          TermPtr other = parse_prefix();
          return mk_sum(mk_if(guard, std::move(body)), mk_if(mk_bnot(guard), std::move(other)));
        }
        return mk_if(std::move(guard), std::move(body));
      }
      lex_.error("unexpected keyword '" + t.text + "' in a process");
    }
    if (t.kind == Tok::Ident) {
      const Token& t2 = lex_.peek2();
      if (t2.kind == Tok::Punct && (t2.text == "?" || t2.text == "!" || t2.text == "[")) {
        std::string name = lex_.next().text;
        if (accept_punct("?")) {
          std::string var = expect_ident();
          expect_punct(".");
          TermPtr cont = parse_prefix();
          if (defs_->is_quantum_chan(name)) return mk_qinput(name, var, std::move(cont));
          if (defs_->is_classical_chan(name)) return mk_cinput(name, var, std::move(cont));
          lex_.error("undeclared channel: " + name);
        }
        if (accept_punct("!")) {
          if (defs_->is_quantum_chan(name)) {
            std::string qv = expect_ident();
            expect_punct(".");
            return mk_qoutput(name, qv, parse_prefix());
          }
          if (!defs_->is_classical_chan(name)) lex_.error("undeclared channel: " + name);
          ExprPtr e = parse_expr();
          expect_punct(".");
          return mk_coutput(name, std::move(e), parse_prefix());
        }
        // NAME [ ... ] . P  — super-operator or measurement application
        expect_punct("[");
        std::vector<std::string> qargs{expect_ident()};
        while (accept_punct(",")) qargs.push_back(expect_ident());
        std::string mvar;
        bool is_meas = false;
        if (accept_punct(";")) {
          is_meas = true;
          mvar = expect_ident();
        }
        expect_punct("]");
        expect_punct(".");
        TermPtr cont = parse_prefix();
        if (is_meas) {
          if (!defs_->measurements.count(name)) lex_.error("undeclared measurement: " + name);
          return mk_measapp(name, std::move(qargs), std::move(mvar), std::move(cont));
        }
        if (defs_->superops.count(name)) return mk_superapp(name, std::move(qargs), std::move(cont));
        lex_.error("undeclared super-operator: " + name);
      }
    }
    return parse_postfix();
  }

  TermPtr parse_postfix() {
    TermPtr t = parse_atom();
    for (;;) {
      if (lex_.peek().kind == Tok::Punct && lex_.peek().text == "\\") {
        lex_.next();
        expect_punct("{");
        std::vector<std::string> chans{expect_ident()};
        while (accept_punct(",")) chans.push_back(expect_ident());
        expect_punct("}");
        t = mk_restrict(std::move(t), std::move(chans));
        continue;
      }
      if (lex_.peek().kind == Tok::Punct && lex_.peek().text == "[") {
        lex_.next();
        std::string fn = expect_ident();
        expect_punct("]");
        t = mk_relabel(std::move(t), std::move(fn));
        continue;
      }
      break;
    }
    return t;
  }

  TermPtr parse_atom() {
    if (accept_keyword("nil")) return mk_nil();
    if (accept_punct("(")) {
      TermPtr t = parse_proc();
      expect_punct(")");
      return t;
    }
    if (lex_.peek().kind == Tok::Ident) {
      std::string name = lex_.next().text;
      expect_punct("(");
      std::vector<std::string> qargs;
      while (lex_.peek().kind == Tok::Ident) {
        qargs.push_back(lex_.next().text);
        if (!accept_punct(",")) break;
      }
      expect_punct(";");
      std::vector<ExprPtr> eargs;
      if (!(lex_.peek().kind == Tok::Punct && lex_.peek().text == ")")) {
        eargs.push_back(parse_expr());
        while (accept_punct(",")) eargs.push_back(parse_expr());
      }
      expect_punct(")");
      return mk_constapp(std::move(name), std::move(qargs), std::move(eargs));
    }
    lex_.error("expected a process term, found '" + lex_.peek().text + "'");
  }

  // --- expressions ---

  ExprPtr parse_expr() {
    ExprPtr t = parse_expr_term();
    for (;;) {
      if (accept_punct("+"))
        t = mk_expr(ExprKind::Add, {t, parse_expr_term()});
      else if (lex_.peek().kind == Tok::Punct && lex_.peek().text == "-") {
        lex_.next();
        t = mk_expr(ExprKind::Sub, {t, parse_expr_term()});
      } else {
        break;
      }
    }
    return t;
  }

  ExprPtr parse_expr_term() {
    ExprPtr t = parse_expr_factor();
    while (accept_punct("*")) t = mk_expr(ExprKind::Mul, {t, parse_expr_factor()});
    return t;
  }

  ExprPtr parse_expr_factor() {
    const Token& t = lex_.peek();
    if (t.kind == Tok::Punct && t.text == "-") {
      lex_.next();
      return mk_expr(ExprKind::Neg, {parse_expr_factor()});
    }
    if (t.kind == Tok::Punct && t.text == "(") {
      lex_.next();
      ExprPtr e = parse_expr();
      expect_punct(")");
      return e;
    }
    if (t.kind == Tok::Int) {
      long long num = lex_.next().int_val;
      if (accept_punct("/")) {
        long long den = expect_int();
        return mk_lit(Value(Rational(num, den)));
      }
      return mk_lit(Value(Rational(num)));
    }
    if (t.kind == Tok::String) return mk_lit(Value::bits(lex_.next().text));
    if (t.kind == Tok::Keyword &&
        (t.text == "cmp" || t.text == "substr" || t.text == "remstr" || t.text == "len")) {
      std::string fn = lex_.next().text;
      expect_punct("(");
      std::vector<ExprPtr> args{parse_expr()};
      while (accept_punct(",")) args.push_back(parse_expr());
      expect_punct(")");
      size_t want = fn == "cmp" ? 3 : fn == "len" ? 1 : 2;
      if (args.size() != want) lex_.error(fn + " expects " + std::to_string(want) + " arguments");
      ExprKind k = fn == "cmp"      ? ExprKind::Cmp
                   : fn == "substr" ? ExprKind::SubStr
                   : fn == "remstr" ? ExprKind::RemStr
                                    : ExprKind::Len;
      return mk_expr(k, std::move(args));
    }
    if (t.kind == Tok::Ident) return mk_var(lex_.next().text);
    lex_.error("expected an expression, found '" + t.text + "'");
  }

  // --- boolean expressions ---

  BExprPtr parse_bexpr() {
    BExprPtr a = parse_bor();
    if (accept_punct("->")) return mk_bbin(BExprKind::Imp, std::move(a), parse_bexpr());
    return a;
  }
  BExprPtr parse_bor() {
    BExprPtr a = parse_band();
    while (accept_keyword("or")) a = mk_bbin(BExprKind::Or, std::move(a), parse_band());
    return a;
  }
  BExprPtr parse_band() {
    BExprPtr a = parse_bnot();
    while (accept_keyword("and")) a = mk_bbin(BExprKind::And, std::move(a), parse_bnot());
    return a;
  }
  BExprPtr parse_bnot() {
    if (accept_keyword("not")) return mk_bnot(parse_bnot());
    if (accept_keyword("true")) return mk_blit(true);
    if (accept_keyword("false")) return mk_blit(false);
    if (lex_.peek().kind == Tok::Punct && lex_.peek().text == "(") {
      // Could be a parenthesised boolean or the left operand of a relation.
      // Boolean grammar keeps relations unparenthesised, so try boolean first.
      lex_.next();
      BExprPtr inner = parse_bexpr();
      expect_punct(")");
      return inner;
    }
    ExprPtr lhs = parse_expr();
    RelOp op;
    const Token& t = lex_.peek();
    if (t.kind != Tok::Punct) lex_.error("expected a comparison operator");
    if (t.text == "<")
      op = RelOp::Lt;
    else if (t.text == ">")
      op = RelOp::Gt;
    else if (t.text == "<=")
      op = RelOp::Le;
    else if (t.text == ">=")
      op = RelOp::Ge;
    else if (t.text == "=")
      op = RelOp::Eq;
    else if (t.text == "!=")
      op = RelOp::Ne;
    else
      lex_.error("expected a comparison operator, found '" + t.text + "'");
    lex_.next();
    return mk_rel(op, std::move(lhs), parse_expr());
  }
};

}  // namespace

Module parse(const std::string& source) {
  Parser p(source, nullptr);
  return p.parse_module();
}

TermPtr parse_term(const std::string& text, const Defs& defs) {
  Defs copy = defs;
  Parser p(text, &copy);
  return p.parse_single_term();
}

}  // namespace qccs::syntax
