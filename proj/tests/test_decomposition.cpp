#include <catch_amalgamated.hpp>

#include <random>

#include <fluxsynth/marking.hpp>

#include "test_util.hpp"

using namespace fluxsynth;

namespace
{

struct pipeline
{
  finite_state_machine fsm;
  state_encoding enc;
  transition_tables tab;
  opt_result_table opt;
};

pipeline first_encoding( std::string const& file )
{
  auto fsm = read_fsm_file( test::data_path( file ) );
  auto enc = *encoding_tree( fsm, minimal_width( fsm.states.size() ) ).next();
  auto tab = extract_tables( fsm, enc );
  auto opt = per_bit_expressions( tab );
  return { std::move( fsm ), std::move( enc ), std::move( tab ), std::move( opt ) };
}

bool same( opt_result_table const& opt, bdd_manager::node f, std::string const& text )
{
  return equivalent( robdd{ opt.manager, f }, build( parse_expr( text ), opt.manager->order() ) );
}

bool eval( opt_result_table const& opt, bdd_manager::node f, uint64_t code, int pulse )
{
  std::vector<bool> a( opt.manager->num_vars(), false );
  for ( uint32_t b = 0; b < opt.width; ++b )
    a[opt.bit_var( b )] = ( code >> b ) & 1u;
  if ( pulse >= 0 )
    a[opt.input_var( static_cast<uint32_t>( pulse ) )] = true;
  return opt.manager->evaluate( f, a );
}

std::map<std::string, uint8_t> ports_of( marked_design const& d, uint32_t bit )
{
  std::map<std::string, uint8_t> m;
  if ( auto c = d.component( bit ) )
    for ( auto const& p : c->ports )
      m[p.net] = p.effects;
  return m;
}

} // namespace

TEST_CASE( "ERDFF transition table", "[decomposition]" )
{
  auto const p = first_encoding( "fsm/erdff.fsm" );
  auto const& t = p.tab;
  auto const din = 0, rst = 1, en = 2, clk = 3;
  std::vector<std::vector<uint64_t>> const expected{
      /* code:   00  01  10  11 */
      { 1, 1, 3, 3 }, /* Din */
      { 0, 0, 2, 2 }, /* Rst */
      { 0, 2, 0, 2 }, /* En */
      { 0, 1, 2, 3 }  /* Clk */
  };
  for ( int sig : { din, rst, en, clk } )
    CHECK( t.next[sig] == expected[sig] );
  CHECK( t.emit[0][clk] == std::vector<bool>{ false, false, true, true } );
  CHECK( t.emit[0][din] == std::vector<bool>{ false, false, false, false } );
  CHECK( std::count( t.care.begin(), t.care.end(), true ) == 4 );
}

TEST_CASE( "hold-only machine yields identity columns", "[decomposition]" )
{
  auto const fsm = parse_fsm( ".inputs a b\n.states S T\n.initial S\n" );
  auto const tab = extract_tables( fsm, state_encoding{ 1, { 0, 1 }, 0 } );
  for ( auto const& column : tab.next )
    CHECK( column == std::vector<uint64_t>{ 0, 1 } );
}

TEST_CASE( "tables agree with direct stepping", "[decomposition][property]" )
{
  std::mt19937 rng( 4 );
  for ( int iter = 0; iter < 100; ++iter )
  {
    auto const fsm = test::random_fsm( rng, 4, 3, 2 );
    auto const encs = enumerate_encodings( fsm, 2 + iter % 2, 50 );
    if ( encs.empty() )
      continue;
    auto const& enc = encs[rng() % encs.size()];
    auto const tab = extract_tables( fsm, enc );
    auto const unreachable = unreachable_states( fsm );
    for ( uint32_t s = 0; s < fsm.states.size(); ++s )
    {
      bool const reach = std::find( unreachable.begin(), unreachable.end(), fsm.states[s] ) == unreachable.end();
      CHECK( tab.care[enc.codes[s]] == reach );
      if ( !reach )
        continue;
      for ( uint32_t sig = 0; sig < 3; ++sig )
      {
        auto const r = fsm_step( fsm, s, sig );
        CHECK( tab.next[sig][enc.codes[s]] == enc.codes[r.next] );
        for ( uint32_t o = 0; o < 2; ++o )
          CHECK( tab.emit[o][sig][enc.codes[s]] == ( std::find( r.outputs.begin(), r.outputs.end(), o ) != r.outputs.end() ) );
      }
    }
  }
}

TEST_CASE( "ERDFF decomposition", "[decomposition]" )
{
  auto const p = first_encoding( "fsm/erdff.fsm" );
  auto const& o = p.opt;
  CHECK( same( o, o.next[0][0], "Q0 + Din" ) );
  CHECK( same( o, o.next[0][1], "Q0 & !Rst" ) );
  CHECK( same( o, o.next[0][2], "Q0 & !En" ) );
  CHECK( same( o, o.next[0][3], "Q0" ) );
  CHECK( same( o, o.next[1][0], "Q1" ) );
  CHECK( same( o, o.next[1][1], "Q1" ) );
  CHECK( same( o, o.next[1][2], "Q1 & !En | Q0 & En" ) );
  CHECK( same( o, o.next[1][3], "Q1" ) );
  CHECK( same( o, o.out[0], "Q1 & Clk" ) );
  CHECK( o.shape[1][2] == bit_pattern::clear_set_net );

  auto const dump = dump_tables( p.fsm, p.enc, p.tab, p.opt );
  CHECK_THAT( dump, Catch::Matchers::ContainsSubstring( "S1      01      01" ) );
  CHECK_THAT( dump, Catch::Matchers::ContainsSubstring( "11/Out" ) );
  CHECK_THAT( dump, Catch::Matchers::ContainsSubstring( "Q1* = " ) );
}

TEST_CASE( "feedback decomposition", "[decomposition]" )
{
  auto const p = first_encoding( "fsm/feedback.fsm" );
  auto const& o = p.opt;
  uint32_t const a = 0, b = 1, clk = 2;
  CHECK( same( o, o.next[2][a], "Q2" ) );
  CHECK( same( o, o.next[1][a], "Q1" ) );
  CHECK( same( o, o.next[0][a], "Q0 + A" ) );
  CHECK( same( o, o.next[2][b], "Q2" ) );
  CHECK( same( o, o.next[1][b], "Q1 + B" ) );
  CHECK( same( o, o.next[0][b], "Q0" ) );
  CHECK( same( o, o.next[2][clk], "Q2 & !Clk | (Q2 & Q0 | Q1) & Clk" ) );
  CHECK( same( o, o.next[1][clk], "Q1 & !Clk" ) );
  CHECK( same( o, o.next[0][clk], "Q0 & !Clk" ) );
  CHECK( same( o, o.out[0], "(Q2 & Q0 + Q1) & Clk" ) );
}

TEST_CASE( "2-bit counter decomposition", "[decomposition]" )
{
  auto const p = first_encoding( "fsm/counter2.fsm" );
  auto const& o = p.opt;
  CHECK( same( o, o.next[1][0], "Q1 ^ (Q0 & Din)" ) );
  CHECK( same( o, o.next[0][0], "Q0 ^ Din" ) );
  CHECK( same( o, o.next[1][1], "Q1 & !Rst" ) );
  CHECK( same( o, o.next[0][1], "Q0 & !Rst" ) );
  CHECK( same( o, o.next[1][2], "Q1" ) );
  CHECK( same( o, o.next[0][2], "Q0" ) );
  CHECK( same( o, o.out[0], "Q0 & Clk" ) );
  CHECK( same( o, o.out[1], "Q1 & Clk" ) );

  /* the symbolic builder agrees */
  auto const sym = counter_opt_table( 2 );
  REQUIRE( sym.manager->order() == o.manager->order() );
  for ( uint32_t bit = 0; bit < 2; ++bit )
    for ( uint32_t sig = 0; sig < 3; ++sig )
      CHECK( equivalent( sym.next_bdd( bit, sig ), o.next_bdd( bit, sig ) ) );
}

TEST_CASE( "marking the golden machines", "[decomposition][marking]" )
{
  auto const erdff = mark_effects( first_encoding( "fsm/erdff.fsm" ).opt );
  CHECK( ports_of( erdff, 0 ) == std::map<std::string, uint8_t>{ { "Din", fx_set }, { "Rst", fx_clear }, { "En", fx_clear | fx_out } } );
  CHECK( ports_of( erdff, 1 ) == std::map<std::string, uint8_t>{ { "q0_En", fx_set }, { "En", fx_clear }, { "Clk", fx_out } } );
  REQUIRE( erdff.find_net( "q0_En" ) );
  CHECK( erdff.find_net( "q0_En" )->expression == "Q0&En" );
  CHECK( erdff.output_nets == std::vector<std::string>{ "Out" } );
  CHECK( read_order_violations( erdff ).empty() );

  auto const counter = mark_effects( first_encoding( "fsm/counter2.fsm" ).opt );
  CHECK( ports_of( counter, 0 ) == std::map<std::string, uint8_t>{ { "Din", fx_toggle | fx_out }, { "Rst", fx_clear }, { "Clk", fx_out } } );
  CHECK( ports_of( counter, 1 ) == std::map<std::string, uint8_t>{ { "q0_Din", fx_toggle }, { "Rst", fx_clear }, { "Clk", fx_out } } );

  auto fb = mark_effects( first_encoding( "fsm/feedback.fsm" ).opt );
  CHECK( ports_of( fb, 2 ) == std::map<std::string, uint8_t>{ { "Out", fx_set }, { "Clk", fx_clear }, { "q0_Clk", fx_out } } );
  CHECK_FALSE( read_order_violations( fb ).empty() );
  recognize_groups( fb );
  REQUIRE( fb.and_groups.size() == 1 );
  CHECK( fb.and_groups[0].bit_a == 0 );
  CHECK( fb.and_groups[0].bit_b == 2 );
  CHECK( fb.and_groups[0].trigger == "Clk" );
  CHECK( fb.and_groups[0].set_a == "A" );
  CHECK( fb.and_groups[0].set_b == "Out" );
  REQUIRE( fb.or_merges.size() == 1 );
  CHECK( fb.or_merges[0].net == "Out" );
  CHECK( fb.or_merges[0].terms.size() == 2 );
  CHECK( read_order_violations( fb ).empty() );

  auto single = mark_effects( first_encoding( "fsm/erdff.fsm" ).opt );
  recognize_groups( single );
  CHECK( single.and_groups.empty() );
  CHECK( single.or_merges.empty() );
}

TEST_CASE( "two AND groups under one merge", "[decomposition][marking]" )
{
  auto t = opt_result_table::make( 4, { "A", "B", "C", "D", "Clk" }, { "Out" } );
  auto& m = *t.manager;
  for ( uint32_t b = 0; b < 4; ++b )
  {
    t.set_next( b, b, bdd_manager::true_node );
    t.set_next( b, 4, bdd_manager::false_node );
  }
  t.out[0] = m.build( parse_expr( "(Q0 & Q1 | Q2 & Q3) & Clk" ) );
  auto d = mark_effects( t );
  recognize_groups( d );
  CHECK( d.and_groups.size() == 2 );
  CHECK( d.or_merges.size() == 1 );
  CHECK( read_order_violations( d ).empty() );
}

TEST_CASE( "unmappable expressions", "[decomposition][marking]" )
{
  {
    auto t = opt_result_table::make( 1, { "A", "B" }, {} );
    t.next[0][0] = t.manager->build( parse_expr( "Q0 & B | A" ) );
    CHECK_THROWS_AS( mark_effects( t ), unmappable_pattern );
  }
  {
    auto t = opt_result_table::make( 1, { "A", "B" }, { "O" } );
    t.out[0] = t.manager->build( parse_expr( "A & B" ) );
    CHECK_THROWS_AS( mark_effects( t ), unmappable_pattern );
  }
  {
    auto t = opt_result_table::make( 1, { "A" }, { "O" } );
    t.out[0] = t.manager->build( parse_expr( "Q0" ) );
    try
    {
      mark_effects( t );
      FAIL( "expected unmappable_pattern" );
    }
    catch ( unmappable_pattern const& e )
    {
      CHECK( e.expression() == "Q0" );
    }
  }
}

TEST_CASE( "degenerate designs", "[decomposition][marking]" )
{
  auto const one = parse_fsm( ".inputs a\n.outputs o\n.states S\n.initial S\n.out S a o\n" );
  auto const opt = per_bit_expressions( extract_tables( one, state_encoding{ 0, { 0 }, 0 } ) );
  auto const d = mark_effects( opt );
  CHECK( d.components.empty() );
  CHECK( d.output_nets == std::vector<std::string>{ "a" } );

  /* state is never observed: everything is pruned */
  auto const blind = parse_fsm( ".inputs a\n.states S T\n.initial S\n.trans S a T\n.trans T a S\n" );
  auto const d2 = mark_effects( per_bit_expressions( extract_tables( blind, state_encoding{ 1, { 0, 1 }, 0 } ) ) );
  CHECK( d2.components.empty() );
  CHECK( d2.nets.empty() );
}

TEST_CASE( "property: expressions replay the machine", "[decomposition][property]" )
{
  std::mt19937 rng( 11 );
  int checked = 0;
  for ( int iter = 0; iter < 200; ++iter )
  {
    auto const states = 2 + static_cast<uint32_t>( rng() % 7 );
    auto const fsm = test::random_fsm( rng, states, 1 + rng() % 3, rng() % 3 );
    auto const width = std::min( 4u, minimal_width( states ) + static_cast<uint32_t>( rng() % 2 ) );
    auto const encs = enumerate_encodings( fsm, width, 20 );
    if ( encs.empty() )
      continue;
    auto const& enc = encs[rng() % encs.size()];
    auto const opt = per_bit_expressions( extract_tables( fsm, enc ) );
    auto const unreachable = unreachable_states( fsm );
    for ( uint32_t s = 0; s < states; ++s )
    {
      if ( std::find( unreachable.begin(), unreachable.end(), fsm.states[s] ) != unreachable.end() )
        continue;
      for ( uint32_t sig = 0; sig < fsm.inputs.size(); ++sig )
      {
        auto const r = fsm_step( fsm, s, sig );
        for ( uint32_t b = 0; b < width; ++b )
          CHECK( eval( opt, opt.next[b][sig], enc.codes[s], static_cast<int>( sig ) ) == ( ( enc.codes[r.next] >> b ) & 1u ) );
        for ( uint32_t o = 0; o < fsm.outputs.size(); ++o )
          CHECK( eval( opt, opt.out[o], enc.codes[s], static_cast<int>( sig ) ) ==
                 ( std::find( r.outputs.begin(), r.outputs.end(), o ) != r.outputs.end() ) );
        /* no pulse: state holds and nothing is emitted */
        for ( uint32_t b = 0; b < width; ++b )
          CHECK( eval( opt, opt.next[b][sig], enc.codes[s], -1 ) == ( ( enc.codes[s] >> b ) & 1u ) );
      }
    }
    ++checked;
  }
  CHECK( checked >= 150 );
}

TEST_CASE( "property: port effects reproduce the expressions", "[decomposition][property]" )
{
  std::mt19937 rng( 23 );
  for ( int iter = 0; iter < 150; ++iter )
  {
    auto const states = 2 + static_cast<uint32_t>( rng() % 5 );
    auto const fsm = test::random_fsm( rng, states, 1 + rng() % 3, 1 + rng() % 2 );
    auto const width = minimal_width( states );
    auto const encs = enumerate_encodings( fsm, width, 10 );
    if ( encs.empty() )
      continue;
    auto const opt = per_bit_expressions( extract_tables( fsm, encs[rng() % encs.size()] ) );
    auto const d = mark_effects( opt );
    auto& m = *opt.manager;

    for ( auto const& c : d.components )
      for ( uint32_t sig = 0; sig < opt.inputs.size(); ++sig )
        for ( uint64_t code = 0; code < ( uint64_t{ 1 } << width ); ++code )
        {
          std::vector<bool> a( m.num_vars(), false );
          for ( uint32_t b = 0; b < width; ++b )
            a[opt.bit_var( b )] = ( code >> b ) & 1u;
          a[opt.input_var( sig )] = true;

          /* the trigger acts first, derived nets afterwards */
          bool v = ( code >> c.bit ) & 1u;
          auto apply = [&]( uint8_t fx ) {
            if ( fx & fx_set )
              v = true;
            if ( fx & fx_clear )
              v = false;
            if ( fx & fx_toggle )
              v = !v;
          };
          if ( auto p = c.find( opt.inputs[sig] ) )
            apply( p->effects );
          for ( auto const& p : c.ports )
          {
            auto const* n = d.find_net( p.net );
            if ( n && m.evaluate( n->function, a ) )
              apply( p.effects );
          }
          CHECK( v == m.evaluate( opt.next[c.bit][sig], a ) );
        }
  }
}
