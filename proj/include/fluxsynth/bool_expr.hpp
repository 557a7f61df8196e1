/*!
  \file bool_expr.hpp
  \brief Boolean expression trees over named variables
*/

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "fsm.hpp"

namespace fluxsynth
{

/*! \brief Immutable expression tree with shared subtrees.
 *
 * Operators: constants, variables, NOT, n-ary AND, n-ary OR, binary XOR.
 */
class bool_expr
{
public:
  enum class kind : uint8_t
  {
    zero,
    one,
    var,
    not_,
    and_,
    or_,
    xor_
  };

  bool_expr() : node_( std::make_shared<node>( node{ kind::zero, {}, {} } ) ) {}

  static bool_expr constant( bool v ) { return bool_expr( v ? kind::one : kind::zero, {}, {} ); }
  static bool_expr variable( std::string name ) { return bool_expr( kind::var, std::move( name ), {} ); }

  friend bool_expr operator!( bool_expr const& a ) { return bool_expr( kind::not_, {}, { a } ); }
  friend bool_expr operator&( bool_expr const& a, bool_expr const& b ) { return bool_expr( kind::and_, {}, { a, b } ); }
  friend bool_expr operator|( bool_expr const& a, bool_expr const& b ) { return bool_expr( kind::or_, {}, { a, b } ); }
  friend bool_expr operator^( bool_expr const& a, bool_expr const& b ) { return bool_expr( kind::xor_, {}, { a, b } ); }

  static bool_expr conjunction( std::vector<bool_expr> terms )
  {
    if ( terms.empty() )
      return constant( true );
    if ( terms.size() == 1 )
      return terms.front();
    return bool_expr( kind::and_, {}, std::move( terms ) );
  }

  static bool_expr disjunction( std::vector<bool_expr> terms )
  {
    if ( terms.empty() )
      return constant( false );
    if ( terms.size() == 1 )
      return terms.front();
    return bool_expr( kind::or_, {}, std::move( terms ) );
  }

  kind type() const { return node_->type; }
  std::string const& name() const { return node_->name; }
  std::vector<bool_expr> const& children() const { return node_->children; }

  /*! \brief Evaluates with a variable lookup; throws on unknown variables. */
  bool evaluate( std::function<bool( std::string const& )> const& value ) const
  {
    switch ( type() )
    {
    case kind::zero:
      return false;
    case kind::one:
      return true;
    case kind::var:
      return value( name() );
    case kind::not_:
      return !children()[0].evaluate( value );
    case kind::and_:
      for ( auto const& c : children() )
        if ( !c.evaluate( value ) )
          return false;
      return true;
    case kind::or_:
      for ( auto const& c : children() )
        if ( c.evaluate( value ) )
          return true;
      return false;
    case kind::xor_:
    {
      bool r = false;
      for ( auto const& c : children() )
        r ^= c.evaluate( value );
      return r;
    }
    }
    return false;
  }

  void collect_variables( std::vector<std::string>& vars ) const
  {
    if ( type() == kind::var )
    {
      if ( std::find( vars.begin(), vars.end(), name() ) == vars.end() )
        vars.push_back( name() );
      return;
    }
    for ( auto const& c : children() )
      c.collect_variables( vars );
  }

  /*! \brief Infix form: `!` > `&` > `^` > `|`, parenthesized where needed. */
  std::string to_string() const { return print( 0 ); }

private:
  struct node
  {
    kind type;
    std::string name;
    std::vector<bool_expr> children;
  };

  bool_expr( kind k, std::string name, std::vector<bool_expr> children )
      : node_( std::make_shared<node>( node{ k, std::move( name ), std::move( children ) } ) )
  {
  }

  static int precedence( kind k )
  {
    switch ( k )
    {
    case kind::or_:
      return 1;
    case kind::xor_:
      return 2;
    case kind::and_:
      return 3;
    default:
      return 4;
    }
  }

  std::string print( int parent ) const
  {
    switch ( type() )
    {
    case kind::zero:
      return "0";
    case kind::one:
      return "1";
    case kind::var:
      return name();
    case kind::not_:
      return "!" + children()[0].print( 4 );
    default:
      break;
    }
    auto const prec = precedence( type() );
    char const* op = type() == kind::and_ ? "&" : type() == kind::or_ ? " | " : " ^ ";
    std::string s;
    for ( std::size_t i = 0; i < children().size(); ++i )
    {
      if ( i )
        s += op;
      s += children()[i].print( prec + ( type() == kind::xor_ ? 1 : 0 ) );
    }
    return prec < parent ? "(" + s + ")" : s;
  }

  std::shared_ptr<node const> node_;
};

/*! \brief Parses infix expressions.
 *
 * Accepts `!`/`~` for NOT, `&`/`*` for AND, `|`/`+` for OR, `^` for XOR,
 * parentheses, constants `0`/`1`, and identifiers.
 */
inline bool_expr parse_expr( std::string_view text )
{
  struct parser
  {
    std::string_view s;
    std::size_t pos = 0;

    void skip()
    {
      while ( pos < s.size() && std::isspace( static_cast<unsigned char>( s[pos] ) ) )
        ++pos;
    }
    bool accept( char c )
    {
      skip();
      if ( pos < s.size() && s[pos] == c )
      {
        ++pos;
        return true;
      }
      return false;
    }
    [[noreturn]] void fail( std::string const& what ) const
    {
      throw validation_error( fmt::format( "expression '{}': {} at offset {}", s, what, pos ) );
    }

    bool_expr parse_or()
    {
      std::vector<bool_expr> terms{ parse_xor() };
      while ( accept( '|' ) || accept( '+' ) )
        terms.push_back( parse_xor() );
      return bool_expr::disjunction( std::move( terms ) );
    }
    bool_expr parse_xor()
    {
      auto lhs = parse_and();
      while ( accept( '^' ) )
        lhs = lhs ^ parse_and();
      return lhs;
    }
    bool_expr parse_and()
    {
      std::vector<bool_expr> terms{ parse_unary() };
      while ( accept( '&' ) || accept( '*' ) )
        terms.push_back( parse_unary() );
      return bool_expr::conjunction( std::move( terms ) );
    }
    bool_expr parse_unary()
    {
      if ( accept( '!' ) || accept( '~' ) )
        return !parse_unary();
      if ( accept( '(' ) )
      {
        auto e = parse_or();
        if ( !accept( ')' ) )
          fail( "expected ')'" );
        return e;
      }
      skip();
      auto const start = pos;
      while ( pos < s.size() && ( std::isalnum( static_cast<unsigned char>( s[pos] ) ) || s[pos] == '_' ) )
        ++pos;
      if ( start == pos )
        fail( "expected operand" );
      auto const tok = s.substr( start, pos - start );
      if ( tok == "0" )
        return bool_expr::constant( false );
      if ( tok == "1" )
        return bool_expr::constant( true );
      if ( std::isdigit( static_cast<unsigned char>( tok.front() ) ) )
        fail( "invalid identifier" );
      return bool_expr::variable( std::string( tok ) );
    }
  };

  parser p{ text };
  auto e = p.parse_or();
  p.skip();
  if ( p.pos != text.size() )
    p.fail( "trailing input" );
  return e;
}

} // namespace fluxsynth
