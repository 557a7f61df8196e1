#include <catch_amalgamated.hpp>

#include <fluxsynth/pdk.hpp>

#include "test_util.hpp"

using namespace fluxsynth;

namespace
{

pdk const& sample()
{
  static pdk const lib = load_pdk( test::data_path( "pdk/sample.json" ) );
  return lib;
}

/* one instance of `cell`, every pin on a net of the same name */
netlist single( std::string const& cell_name )
{
  auto const& c = sample().get_cell( cell_name );
  netlist n;
  n.name = "one";
  instance i{ "u", c.name, {} };
  for ( auto const& p : c.ports )
  {
    n.inputs.push_back( p.name );
    i.pins.emplace_back( p.name, p.name );
  }
  for ( auto const& o : c.output_pins() )
  {
    n.outputs.emplace_back( o, o );
    i.pins.emplace_back( o, o );
  }
  n.instances.push_back( i );
  return n;
}

netlist erdff_netlist( std::string const& q1_cell = "NDRO" )
{
  netlist n;
  n.name = "erdff";
  n.inputs = { "Din", "Rst", "En", "Clk" };
  n.outputs = { { "Out", "Out" } };
  n.instances.push_back( { "q0", "RDFF", { { "din", "Din" }, { "rst", "Rst" }, { "clk", "En" }, { "q", "q0_En" } } } );
  n.instances.push_back( { "q1", q1_cell, { { "din", "q0_En" }, { "rst", "En" }, { "clk", "Clk" }, { "q", "Out" } } } );
  return n;
}

struct row
{
  uint8_t state;
  std::string port;
  uint8_t next;
  std::vector<std::string> emitted;
};

void check_table( std::string const& cell_name, std::vector<row> const& table )
{
  auto const n = single( cell_name );
  simulator sim( n, sample() );
  for ( auto const& r : table )
  {
    auto st = sim.state();
    st.bits[0] = r.state;
    sim.restore( st );
    auto const port = static_cast<uint32_t>( std::find( n.inputs.begin(), n.inputs.end(), r.port ) - n.inputs.begin() );
    std::vector<std::string> got;
    for ( auto o : sim.step( { port } ) )
      got.push_back( n.outputs[o].first );
    INFO( cell_name << " state " << int( r.state ) << " port " << r.port );
    CHECK( got == r.emitted );
    CHECK( sim.state().bits[0] == r.next );
  }
}

} // namespace

TEST_CASE( "sample library loads", "[pdk]" )
{
  auto const& lib = sample();
  CHECK( signature_to_string( lib.get_cell( "RDFFC" ).sig() ) == "(0,1,6)" );
  CHECK( signature_to_string( lib.get_cell( "RDFF" ).sig() ) == "(0,1,4)" );
  CHECK( signature_to_string( lib.get_cell( "NDRO" ).sig() ) == "(0,1,3)" );
  CHECK( signature_to_string( lib.get_cell( "RTFF" ).sig() ) == "({clear},{toggle,out})" );
  CHECK( lib.supergates.size() == 1 );
  CHECK( signature_to_string( lib.supergates[0].sig() ) == "({clear},{out},{toggle,out})" );
  CHECK( lib.storage_with( make_signature( { fx_clear, fx_set, fx_out } ) )->name == "NDRO" );
  CHECK( lib.cheapest( cell_kind::merge )->name == "CB" );
  CHECK( parse_pdk( to_json( lib ).dump() ) == lib );
}

TEST_CASE( "library validation", "[pdk]" )
{
  auto const base = ordered_json::parse( detail::read_file( test::data_path( "pdk/sample.json" ) ) );
  auto fails = [&]( auto mutate, std::string const& needle ) {
    auto j = base;
    mutate( j );
    try
    {
      pdk_from_json( j );
      FAIL( "expected validation_error" );
    }
    catch ( validation_error const& e )
    {
      CHECK_THAT( e.what(), Catch::Matchers::ContainsSubstring( needle ) );
    }
  };
  fails( []( ordered_json& j ) { j["cells"] = ordered_json::array(); }, "no cells" );
  fails( []( ordered_json& j ) { j["cells"].push_back( j["cells"][0] ); }, "duplicate cell" );
  fails( []( ordered_json& j ) { j["cells"][2]["ports"][2]["type"] = 4; }, "declares type 4" );
  fails( []( ordered_json& j ) { j["cells"][2]["ports"][2].erase( "out_pin" ); }, "out_pin" );
  fails( []( ordered_json& j ) { j["cells"][2]["ports"][0]["effects"] = { "explode" }; }, "unknown effect" );
  fails( []( ordered_json& j ) { j["cells"][7]["ports"][1]["effects"] = { "clear" }; }, "declares type 0" );
  /* the body no longer clears its copy on reset */
  fails( []( ordered_json& j ) { j["supergates"][0]["body"][2]["pins"]["a"] = "floating"; }, "disagrees" );
  fails( []( ordered_json& j ) { j["supergates"][0]["body"][0]["cell"] = "TFF9"; }, "unknown cell" );
  CHECK_THROWS_AS( parse_pdk( "{ not json" ), validation_error );
}

TEST_CASE( "cell models", "[netsim]" )
{
  check_table( "DFF", { { 0, "din", 1, {} }, { 1, "din", 1, {} }, { 0, "clk", 0, {} }, { 1, "clk", 0, { "q" } } } );
  check_table( "NDRO", { { 0, "din", 1, {} },
                         { 1, "din", 1, {} },
                         { 0, "rst", 0, {} },
                         { 1, "rst", 0, {} },
                         { 0, "clk", 0, {} },
                         { 1, "clk", 1, { "q" } } } );
  check_table( "RTFF", { { 0, "t", 1, {} }, { 1, "t", 0, { "co" } }, { 0, "rst", 0, {} }, { 1, "rst", 0, {} } } );
  check_table( "DFFC", { { 0, "din", 1, {} }, { 1, "din", 1, {} }, { 0, "clk", 0, { "qn" } }, { 1, "clk", 0, { "q" } } } );
  check_table( "NOT", { { 0, "clk", 0, { "q" } }, { 1, "clk", 0, {} } } );
}

TEST_CASE( "DFF timing", "[netsim]" )
{
  auto const n = single( "DFF" );
  auto const t = simulate( n, sample(), { { 0, "din" }, { 1, "clk" } }, 3 );
  CHECK( t.outputs == std::vector<pulse_event>{ { 1, "q" } } );
  CHECK( simulate( n, sample(), { { 0, "clk" } }, 2 ).outputs.empty() );
  CHECK_THROWS_AS( simulate( n, sample(), { { 5, "clk" } }, 2 ), validation_error );
  CHECK_THROWS_AS( simulate( n, sample(), { { 0, "nope" } }, 2 ), validation_error );
}

TEST_CASE( "AND cell equals two stored bits read by conjunction", "[netsim][property]" )
{
  auto const n = single( "AND2" );
  simulator sim( n, sample() );
  /* composite: bits a, b set by their ports; clk emits a&b then clears both */
  std::function<void( int, bool, bool )> walk = [&]( int depth, bool a, bool b ) {
    if ( depth == 0 )
      return;
    auto const saved = sim.state();
    for ( uint32_t p = 0; p < 3; ++p )
    {
      auto const got = sim.step( { p } );
      bool na = a, nb = b;
      bool emit = false;
      if ( p == 0 )
        na = true;
      else if ( p == 1 )
        nb = true;
      else
      {
        emit = a && b;
        na = nb = false;
      }
      CHECK( got.size() == ( emit ? 1u : 0u ) );
      walk( depth - 1, na, nb );
      sim.restore( saved );
    }
  };
  for ( uint8_t init = 0; init < 4; ++init )
  {
    auto st = sim.state();
    st.bits[0] = init;
    sim.restore( st );
    walk( 4, init & 1u, init & 2u );
  }
}

TEST_CASE( "feedback edges are deferred by one tick", "[netsim]" )
{
  /* a DFF whose read is merged back into its own input */
  netlist n;
  n.name = "loop";
  n.inputs = { "X", "C" };
  n.outputs = { { "O", "q" } };
  n.instances.push_back( { "m", "CB", { { "a", "X" }, { "b", "q" }, { "q", "d" } } } );
  n.instances.push_back( { "r", "DFF", { { "din", "d" }, { "clk", "C" }, { "q", "q" } } } );
  simulator sim( n, sample() );
  CHECK( sim.feedback_edges() == 1 );
  /* X stores, every clock reads and restores the bit */
  auto const t = simulate( n, sample(), { { 0, "X" }, { 1, "C" }, { 2, "C" }, { 3, "C" } }, 5 );
  CHECK( t.outputs == std::vector<pulse_event>{ { 1, "O" }, { 2, "O" }, { 3, "O" } } );

  CHECK_THROWS_AS( simulate( n, sample(), { { 0, "X" }, { 1, "C" } }, 3, sim_options{ false } ), simulation_error );
  CHECK_NOTHROW( simulate( n, sample(), { { 0, "X" } }, 3, sim_options{ false } ) );
}

TEST_CASE( "netlist construction errors", "[netsim]" )
{
  netlist n = single( "DFF" );
  n.instances[0].pins.pop_back();
  n.instances[0].pins.erase( n.instances[0].pins.begin() );
  CHECK_THROWS_AS( simulator( n, sample() ), validation_error );

  netlist two = single( "DFF" );
  two.instances.push_back( two.instances[0] );
  CHECK_THROWS_AS( simulator( two, sample() ), validation_error );
}

TEST_CASE( "ERDFF netlist equivalence", "[netsim]" )
{
  auto const fsm = read_fsm_file( test::data_path( "fsm/erdff.fsm" ) );
  auto const good = check_equivalence( fsm, erdff_netlist(), sample(), 5 );
  CHECK( good.equivalent );
  CHECK( good.sequences == 1024 );

  auto const bad = check_equivalence( fsm, erdff_netlist( "RDFF" ), sample(), 5 );
  REQUIRE_FALSE( bad.equivalent );
  REQUIRE( bad.counterexample.size() >= 2 );
  CHECK( bad.counterexample[bad.counterexample.size() - 1] == "Clk" );
  CHECK( bad.counterexample[bad.counterexample.size() - 2] == "Clk" );

  CHECK( check_equivalence( fsm, erdff_netlist( "RDFF" ), sample(), 0 ).equivalent );

  auto renamed = erdff_netlist();
  renamed.outputs[0].first = "Q";
  CHECK_THROWS_AS( check_equivalence( fsm, renamed, sample(), 2 ), validation_error );
}

TEST_CASE( "trace dump", "[netsim]" )
{
  auto const t = simulate( erdff_netlist(), sample(), { { 0, "Din" }, { 1, "En" }, { 2, "Clk" } }, 4 );
  CHECK( t.outputs == std::vector<pulse_event>{ { 2, "Out" } } );
  auto const vcd = write_vcd( t, { "Din", "Rst", "En", "Clk" }, { "Out" } );
  CHECK_THAT( vcd, Catch::Matchers::ContainsSubstring( "$var wire 1 % Out $end" ) );
  CHECK_THAT( vcd, Catch::Matchers::ContainsSubstring( "#4\n1$\n1%\n#5\n0$\n0%\n" ) );
}

TEST_CASE( "netlist documents round-trip", "[netlist]" )
{
  auto n = erdff_netlist();
  n.metadata["ordinal"] = 0;
  auto const text = write_netlist_json( n );
  CHECK( read_netlist_json( text ) == n );
  CHECK( write_netlist_json( read_netlist_json( text ) ) == text );
  CHECK_THROWS_AS( read_netlist_json( "{}" ), validation_error );

  auto const hdl = write_netlist_hdl( n );
  CHECK_THAT( hdl, Catch::Matchers::StartsWith( "module erdff(Din, Rst, En, Clk, Out);" ) );
  CHECK_THAT( hdl, Catch::Matchers::ContainsSubstring( "NDRO q1 (.din(q0_En), .rst(En), .clk(Clk), .q(Out));" ) );

  netlist empty;
  empty.name = "empty";
  CHECK( write_netlist_hdl( empty ) == "module empty();\nendmodule\n" );
  CHECK( read_netlist_json( write_netlist_json( empty ) ) == empty );
}
