/*!
  \file bdd.hpp
  \brief Reduced ordered binary decision diagrams

  A `bdd_manager` owns a node store over a fixed variable order; position 0
  in the order is the root-most variable. Nodes 0 and 1 are the terminals.
  A manager is not thread-safe; each worker owns its own.
*/

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "bool_expr.hpp"
#include "sop.hpp"

namespace fluxsynth
{

class bdd_manager
{
public:
  using node = uint32_t;

  static constexpr node false_node = 0;
  static constexpr node true_node = 1;

  explicit bdd_manager( std::vector<std::string> order ) : order_( std::move( order ) )
  {
    auto const terminal = static_cast<uint32_t>( order_.size() );
    nodes_.push_back( { terminal, 0, 0 } );
    nodes_.push_back( { terminal, 1, 1 } );
    for ( uint32_t i = 0; i < order_.size(); ++i )
      if ( !index_.emplace( order_[i], i ).second )
        throw validation_error( fmt::format( "duplicate variable '{}' in order", order_[i] ) );
  }

  std::vector<std::string> const& order() const { return order_; }
  uint32_t num_vars() const { return static_cast<uint32_t>( order_.size() ); }
  std::size_t size() const { return nodes_.size(); }

  uint32_t var_index( std::string const& name ) const
  {
    auto it = index_.find( name );
    if ( it == index_.end() )
      throw validation_error( fmt::format( "unknown variable '{}'", name ) );
    return it->second;
  }

  bool has_var( std::string const& name ) const { return index_.count( name ) != 0; }

  uint32_t level( node f ) const { return nodes_[f].var; }
  node low( node f ) const { return nodes_[f].lo; }
  node high( node f ) const { return nodes_[f].hi; }
  bool is_terminal( node f ) const { return f <= true_node; }

  node constant( bool v ) const { return v ? true_node : false_node; }

  node var( uint32_t index ) { return make( index, false_node, true_node ); }
  node var( std::string const& name ) { return var( var_index( name ) ); }
  node nvar( uint32_t index ) { return make( index, true_node, false_node ); }

  node ite( node f, node g, node h )
  {
    if ( f == true_node )
      return g;
    if ( f == false_node )
      return h;
    if ( g == h )
      return g;
    if ( g == true_node && h == false_node )
      return f;

    key const k{ f, g, h };
    if ( auto it = ite_cache_.find( k ); it != ite_cache_.end() )
      return it->second;

    auto const top = std::min( { level( f ), level( g ), level( h ) } );
    auto const [f0, f1] = cofactors( f, top );
    auto const [g0, g1] = cofactors( g, top );
    auto const [h0, h1] = cofactors( h, top );
    auto const lo = ite( f0, g0, h0 );
    auto const hi = ite( f1, g1, h1 );
    auto const r = make( top, lo, hi );
    ite_cache_.emplace( k, r );
    return r;
  }

  node negate( node f ) { return ite( f, false_node, true_node ); }
  node conj( node f, node g ) { return ite( f, g, false_node ); }
  node disj( node f, node g ) { return ite( f, true_node, g ); }
  node exor( node f, node g ) { return ite( f, negate( g ), g ); }

  /*! \brief Cofactor of `f` with variable `index` fixed to `value`. */
  node restrict( node f, uint32_t index, bool value )
  {
    std::unordered_map<node, node> memo;
    return restrict_rec( f, index, value, memo );
  }

  node restrict( node f, std::string const& name, bool value ) { return restrict( f, var_index( name ), value ); }

  bool evaluate( node f, std::vector<bool> const& assignment ) const
  {
    while ( !is_terminal( f ) )
      f = assignment[level( f )] ? high( f ) : low( f );
    return f == true_node;
  }

  /*! \brief Variable indices the function depends on, ascending. */
  std::vector<uint32_t> support( node f ) const
  {
    std::vector<bool> in( order_.size(), false );
    std::vector<bool> seen( nodes_.size(), false );
    std::vector<node> stack{ f };
    while ( !stack.empty() )
    {
      auto const n = stack.back();
      stack.pop_back();
      if ( is_terminal( n ) || seen[n] )
        continue;
      seen[n] = true;
      in[level( n )] = true;
      stack.push_back( low( n ) );
      stack.push_back( high( n ) );
    }
    std::vector<uint32_t> s;
    for ( uint32_t i = 0; i < in.size(); ++i )
      if ( in[i] )
        s.push_back( i );
    return s;
  }

  /*! \brief Number of distinct nodes reachable from `f`, terminals included. */
  std::size_t node_count( node f ) const
  {
    std::vector<bool> seen( nodes_.size(), false );
    std::vector<node> stack{ f };
    std::size_t n = 0;
    while ( !stack.empty() )
    {
      auto const x = stack.back();
      stack.pop_back();
      if ( seen[x] )
        continue;
      seen[x] = true;
      ++n;
      if ( !is_terminal( x ) )
      {
        stack.push_back( low( x ) );
        stack.push_back( high( x ) );
      }
    }
    return n;
  }

  node build( bool_expr const& e )
  {
    switch ( e.type() )
    {
    case bool_expr::kind::zero:
      return false_node;
    case bool_expr::kind::one:
      return true_node;
    case bool_expr::kind::var:
      return var( e.name() );
    case bool_expr::kind::not_:
      return negate( build( e.children()[0] ) );
    case bool_expr::kind::and_:
    {
      node r = true_node;
      for ( auto const& c : e.children() )
        r = conj( r, build( c ) );
      return r;
    }
    case bool_expr::kind::or_:
    {
      node r = false_node;
      for ( auto const& c : e.children() )
        r = disj( r, build( c ) );
      return r;
    }
    case bool_expr::kind::xor_:
    {
      node r = false_node;
      for ( auto const& c : e.children() )
        r = exor( r, build( c ) );
      return r;
    }
    }
    return false_node;
  }

  /*! \brief Conjunction of literals; `literals` holds (variable index, polarity). */
  node cube( std::vector<std::pair<uint32_t, bool>> const& literals )
  {
    node r = true_node;
    for ( auto const& [v, pos] : literals )
      r = conj( r, pos ? var( v ) : nvar( v ) );
    return r;
  }

  /*! \brief Graphviz rendering (dashed = low edge). */
  std::string to_dot( node f, std::string const& name = "bdd" ) const
  {
    std::string out = fmt::format( "digraph {} {{\n", name );
    out += "  t0 [shape=box,label=\"0\"];\n  t1 [shape=box,label=\"1\"];\n";
    std::vector<bool> seen( nodes_.size(), false );
    std::vector<node> stack{ f };
    std::vector<node> order;
    while ( !stack.empty() )
    {
      auto const x = stack.back();
      stack.pop_back();
      if ( is_terminal( x ) || seen[x] )
        continue;
      seen[x] = true;
      order.push_back( x );
      stack.push_back( high( x ) );
      stack.push_back( low( x ) );
    }
    auto id = [&]( node x ) { return is_terminal( x ) ? fmt::format( "t{}", x ) : fmt::format( "n{}", x ); };
    for ( auto x : order )
    {
      out += fmt::format( "  n{} [label=\"{}\"];\n", x, order_[level( x )] );
      out += fmt::format( "  n{} -> {} [style=dashed];\n", x, id( low( x ) ) );
      out += fmt::format( "  n{} -> {};\n", x, id( high( x ) ) );
    }
    if ( is_terminal( f ) )
      out += fmt::format( "  root -> t{};\n", f );
    out += "}\n";
    return out;
  }

  /*! \brief Minimum-cube SOP of `f`.
   *
   * Exact prime-implicant cover when the support has at most 8 variables,
   * greedy truth-table cover up to 16, and a path-based greedy cover beyond.
   * Cubes are returned as (variable index, polarity) literal lists.
   */
  std::vector<std::vector<std::pair<uint32_t, bool>>> min_sop( node f )
  {
    if ( f == false_node )
      return {};
    if ( f == true_node )
      return { {} };
    auto const sup = support( f );
    auto const n = static_cast<uint32_t>( sup.size() );
    std::vector<std::vector<std::pair<uint32_t, bool>>> result;

    if ( n <= 16 )
    {
      std::vector<bool> on( std::size_t{ 1 } << n ), dc( std::size_t{ 1 } << n, false );
      std::vector<bool> assignment( order_.size(), false );
      for ( uint32_t m = 0; m < on.size(); ++m )
      {
        for ( uint32_t i = 0; i < n; ++i )
          assignment[sup[i]] = ( m >> i ) & 1u;
        on[m] = evaluate( f, assignment );
      }
      for ( auto const& c : minimize_cover( n, on, dc ) )
      {
        std::vector<std::pair<uint32_t, bool>> lits;
        for ( uint32_t i = 0; i < n; ++i )
          if ( c.mask & ( 1u << i ) )
            lits.emplace_back( sup[i], ( c.value >> i ) & 1u );
        result.push_back( std::move( lits ) );
      }
      return result;
    }

    /* paths to the 1-terminal, then literal dropping and redundancy removal */
    std::vector<std::pair<uint32_t, bool>> path;
    collect_paths( f, path, result );
    for ( auto& c : result )
    {
      for ( std::size_t i = 0; i < c.size(); )
      {
        auto trial = c;
        trial.erase( trial.begin() + static_cast<std::ptrdiff_t>( i ) );
        if ( conj( cube( trial ), negate( f ) ) == false_node )
          c = std::move( trial );
        else
          ++i;
      }
    }
    std::sort( result.begin(), result.end() );
    result.erase( std::unique( result.begin(), result.end() ), result.end() );
    for ( std::size_t i = result.size(); i-- > 0; )
    {
      node rest = false_node;
      for ( std::size_t j = 0; j < result.size(); ++j )
        if ( j != i )
          rest = disj( rest, cube( result[j] ) );
      if ( rest == f )
        result.erase( result.begin() + static_cast<std::ptrdiff_t>( i ) );
    }
    return result;
  }

  /*! \brief SOP as an expression tree with variable names from the order. */
  bool_expr to_expr( std::vector<std::vector<std::pair<uint32_t, bool>>> const& sop ) const
  {
    std::vector<bool_expr> terms;
    for ( auto const& c : sop )
    {
      std::vector<bool_expr> lits;
      for ( auto const& [v, pos] : c )
        lits.push_back( pos ? bool_expr::variable( order_[v] ) : !bool_expr::variable( order_[v] ) );
      terms.push_back( bool_expr::conjunction( std::move( lits ) ) );
    }
    return bool_expr::disjunction( std::move( terms ) );
  }

private:
  struct entry
  {
    uint32_t var;
    node lo;
    node hi;
  };

  struct key
  {
    node a, b, c;
    bool operator==( key const& ) const = default;
  };

  struct key_hash
  {
    std::size_t operator()( key const& k ) const
    {
      std::size_t h = k.a;
      h = h * 0x9e3779b97f4a7c15ull + k.b;
      h = h * 0x9e3779b97f4a7c15ull + k.c;
      return h ^ ( h >> 29 );
    }
  };

  node make( uint32_t v, node lo, node hi )
  {
    if ( lo == hi )
      return lo;
    key const k{ v, lo, hi };
    if ( auto it = unique_.find( k ); it != unique_.end() )
      return it->second;
    auto const id = static_cast<node>( nodes_.size() );
    nodes_.push_back( { v, lo, hi } );
    unique_.emplace( k, id );
    return id;
  }

  std::pair<node, node> cofactors( node f, uint32_t v ) const
  {
    if ( level( f ) != v )
      return { f, f };
    return { low( f ), high( f ) };
  }

  node restrict_rec( node f, uint32_t v, bool value, std::unordered_map<node, node>& memo )
  {
    if ( is_terminal( f ) || level( f ) > v )
      return f;
    if ( level( f ) == v )
      return value ? high( f ) : low( f );
    if ( auto it = memo.find( f ); it != memo.end() )
      return it->second;
    auto const lo = restrict_rec( low( f ), v, value, memo );
    auto const hi = restrict_rec( high( f ), v, value, memo );
    auto const r = make( level( f ), lo, hi );
    memo.emplace( f, r );
    return r;
  }

  void collect_paths( node f, std::vector<std::pair<uint32_t, bool>>& path,
                      std::vector<std::vector<std::pair<uint32_t, bool>>>& out ) const
  {
    if ( f == false_node )
      return;
    if ( f == true_node )
    {
      out.push_back( path );
      return;
    }
    path.emplace_back( level( f ), false );
    collect_paths( low( f ), path, out );
    path.back().second = true;
    collect_paths( high( f ), path, out );
    path.pop_back();
  }

  std::vector<std::string> order_;
  std::unordered_map<std::string, uint32_t> index_;
  std::vector<entry> nodes_;
  std::unordered_map<key, node, key_hash> unique_;
  std::unordered_map<key, node, key_hash> ite_cache_;
};

/*! \brief A function handle: a manager plus a root node. */
struct robdd
{
  std::shared_ptr<bdd_manager> manager;
  bdd_manager::node root{ bdd_manager::false_node };

  std::size_t node_count() const { return manager->node_count( root ); }
  std::string to_dot( std::string const& name = "bdd" ) const { return manager->to_dot( root, name ); }
};

/*! \brief Canonical ROBDD of `expr` under `order` in a fresh store.
 *
 * Throws `validation_error` if `expr` uses a variable outside `order`.
 */
inline robdd build( bool_expr const& expr, std::vector<std::string> const& order )
{
  auto mgr = std::make_shared<bdd_manager>( order );
  auto const root = mgr->build( expr );
  return { std::move( mgr ), root };
}

/*! \brief Builds into an existing store (shared canonical roots). */
inline robdd build( bool_expr const& expr, std::shared_ptr<bdd_manager> const& mgr )
{
  return { mgr, mgr->build( expr ) };
}

namespace detail
{

inline bool isomorphic( bdd_manager const& ma, bdd_manager::node a, bdd_manager const& mb, bdd_manager::node b,
                        std::unordered_map<bdd_manager::node, bdd_manager::node>& memo )
{
  if ( ma.is_terminal( a ) || mb.is_terminal( b ) )
    return ma.is_terminal( a ) && mb.is_terminal( b ) && a == b;
  if ( auto it = memo.find( a ); it != memo.end() )
    return it->second == b;
  if ( ma.level( a ) != mb.level( b ) )
    return false;
  memo.emplace( a, b );
  return isomorphic( ma, ma.low( a ), mb, mb.low( b ), memo ) && isomorphic( ma, ma.high( a ), mb, mb.high( b ), memo );
}

} // namespace detail

/*! \brief Functional equivalence of two ROBDDs over the same variable order.
 *
 * Within one store this is root identity; across stores, canonicity makes
 * it a structural isomorphism test.
 */
inline bool equivalent( robdd const& a, robdd const& b )
{
  if ( a.manager->order() != b.manager->order() )
    throw validation_error( "equivalence check across different variable orders" );
  if ( a.manager == b.manager )
    return a.root == b.root;
  std::unordered_map<bdd_manager::node, bdd_manager::node> memo;
  return detail::isomorphic( *a.manager, a.root, *b.manager, b.root, memo );
}

/*! \brief Minimum-cube sum-of-products expression for `d`. */
inline bool_expr to_min_sop( robdd const& d )
{
  return d.manager->to_expr( d.manager->min_sop( d.root ) );
}

} // namespace fluxsynth
