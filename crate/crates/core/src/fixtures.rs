//! A small Spider-style corpus for tests and demos: 10 databases, 50
//! question/gold pairs, and 2 perturbed variants per database for TS.

use std::fs;
use std::path::{Path, PathBuf};

use rusqlite::types::Value;
use rusqlite::{params_from_iter, Connection, OpenFlags};
use thiserror::Error;

use crate::corpus::{write_jsonl, CorpusError, Sample};
use crate::schema::{database_path, introspect_database, DatabaseSchema, SchemaError};

pub const VARIANTS_PER_DB: usize = 2;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("sqlite error building {db_id}: {message}")]
    Sqlite { db_id: String, message: String },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Paths of a built fixture corpus.
#[derive(Debug, Clone)]
pub struct FixtureCorpus {
    pub root: PathBuf,
    pub samples_path: PathBuf,
    pub variant_root: PathBuf,
    pub samples: Vec<Sample>,
}

impl FixtureCorpus {
    pub fn db_path(&self, db_id: &str) -> PathBuf {
        database_path(&self.root, db_id)
    }
}

const CONCERT_SINGER: &str = r#"
CREATE TABLE stadium(Stadium_ID INTEGER PRIMARY KEY, Location TEXT, Name TEXT, Capacity INTEGER, Highest INTEGER, Lowest INTEGER, Average INTEGER);
CREATE TABLE singer(Singer_ID INTEGER PRIMARY KEY, Name TEXT, Country TEXT, Song_Name TEXT, Song_release_year TEXT, Age INTEGER, Is_male TEXT);
CREATE TABLE concert(concert_ID INTEGER PRIMARY KEY, concert_Name TEXT, Theme TEXT, Stadium_ID INTEGER REFERENCES stadium(Stadium_ID), Year TEXT);
CREATE TABLE singer_in_concert(concert_ID INTEGER REFERENCES concert(concert_ID), Singer_ID INTEGER REFERENCES singer(Singer_ID), PRIMARY KEY(concert_ID, Singer_ID));
INSERT INTO stadium VALUES (1,'Raith Rovers','Stark''s Park',10104,4812,1294,2106),(2,'Ayr United','Somerset Park',11998,2363,1057,1477),
  (3,'East Fife','Bayview Stadium',2000,1980,533,864),(4,'Queen''s Park','Hampden Park',52500,1763,466,730),(5,'Stirling Albion','Forthbank Stadium',3808,1125,404,642);
INSERT INTO singer VALUES (1,'Joe Sharp','Netherlands','You','1992',52,'F'),(2,'Timbaland','United States','Dangerous','2008',32,'T'),
  (3,'Justin Brown','France','Hey Oh','2013',29,'T'),(4,'Rose White','France','Sun','2003',41,'F'),(5,'John Nizinik','France','Gentleman','2014',43,'T'),
  (6,'Tribal King','France','Love','2016',25,'T');
INSERT INTO concert VALUES (1,'Auditions','Free choice',1,'2014'),(2,'Super bootcamp','Free choice 2',2,'2014'),(3,'Home Visits','Bleeding Love',2,'2015'),
  (4,'Week 1','Wide Awake',3,'2014'),(5,'Week 1','Happy Tonight',4,'2015'),(6,'Week 2','Party All Night',4,'2015');
INSERT INTO singer_in_concert VALUES (1,2),(1,3),(1,5),(2,3),(2,6),(3,5),(4,4),(5,6),(5,3),(6,2);
"#;

const SOCCER_2: &str = r#"
CREATE TABLE tryout(pid INTEGER REFERENCES player(pid), cname TEXT REFERENCES college(cname), decision TEXT, ppos TEXT, PRIMARY KEY(pid, cname));
CREATE TABLE player(hs INTEGER, pname TEXT, ycard TEXT, pid INTEGER PRIMARY KEY);
CREATE TABLE college(cname TEXT PRIMARY KEY, enr INTEGER, state TEXT);
INSERT INTO player VALUES (1200,'Andrew','no',10001),(1500,'Blake','no',20002),(300,'Charles','no',30003),(600,'David','yes',40004),
  (1600,'Eddie','yes',40002),(1200,'Drago','no',50005);
INSERT INTO college VALUES ('LSU',18000,'LA'),('ASU',12000,'AZ'),('OU',22000,'OK'),('FSU',19000,'FL');
INSERT INTO tryout VALUES (10001,'ASU','yes','goalie'),(10001,'LSU','no','goalie'),(20002,'FSU','no','striker'),(30003,'OU','yes','mid'),
  (40004,'ASU','no','goalie'),(50005,'LSU','yes','mid');
"#;

const PETS_1: &str = r#"
CREATE TABLE Student(StuID INTEGER PRIMARY KEY, LName TEXT, Fname TEXT, Age INTEGER, Sex TEXT, Major INTEGER, Advisor INTEGER, city_code TEXT);
CREATE TABLE Has_Pet(StuID INTEGER REFERENCES Student(StuID), PetID INTEGER REFERENCES Pets(PetID));
CREATE TABLE Pets(PetID INTEGER PRIMARY KEY, PetType TEXT, pet_age INTEGER, weight REAL);
INSERT INTO Student VALUES (1001,'Smith','Linda',18,'F',600,1121,'BAL'),(1002,'Kim','Tracy',19,'F',600,7712,'HKG'),(1003,'Jones','Shiela',21,'F',600,7792,'WAS'),
  (1004,'Kumar','Dinesh',20,'M',600,8423,'CHI'),(1005,'Gompers','Paul',26,'M',600,1121,'YYZ'),(1006,'Schultz','Andy',18,'M',600,1148,'BAL'),
  (1007,'Apap','Lisa',18,'F',600,8918,'PIT'),(1008,'Nelson','Jandy',20,'F',600,9172,'BAL');
INSERT INTO Has_Pet VALUES (1001,2001),(1002,2002),(1002,2003),(1005,2004),(1003,2005);
INSERT INTO Pets VALUES (2001,'cat',3,12.0),(2002,'dog',2,13.4),(2003,'dog',1,9.3),(2004,'cat',5,8.1),(2005,'hamster',1,0.5);
"#;

const BUS_NETWORK: &str = r#"
CREATE TABLE stops(stop_id INTEGER PRIMARY KEY, name TEXT, "free text" TEXT, "route/line" TEXT, zone INTEGER);
CREATE TABLE routes(route_id INTEGER PRIMARY KEY, "route/line" TEXT, operator TEXT);
INSERT INTO stops VALUES (1,'Central','Main hub, covered','A1',1),(2,'Harbour','Sea view','A1',2),(3,'Museum','Near the east gate','B2',1),
  (4,'Station','Rail link','B2',1),(5,'Park','Seasonal only','C3',3);
INSERT INTO routes VALUES (1,'A1','MetroBus'),(2,'B2','CityLink'),(3,'C3','MetroBus');
"#;

const EMPLOYEE_HIRE_EVALUATION: &str = r#"
CREATE TABLE employee(Employee_ID INTEGER PRIMARY KEY, Name TEXT, Age INTEGER, City TEXT);
CREATE TABLE shop(Shop_ID INTEGER PRIMARY KEY, Name TEXT, Location TEXT, District TEXT, Number_products INTEGER, Manager_name TEXT);
CREATE TABLE hiring(Shop_ID INTEGER REFERENCES shop(Shop_ID), Employee_ID INTEGER PRIMARY KEY REFERENCES employee(Employee_ID), Start_from TEXT, Is_full_time TEXT);
CREATE TABLE evaluation(Employee_ID INTEGER REFERENCES employee(Employee_ID), Year_awarded TEXT, Bonus REAL, PRIMARY KEY(Employee_ID, Year_awarded));
INSERT INTO employee VALUES (1,'George Chuter',23,'Bristol'),(2,'Lee Mears',29,'Bath'),(3,'Mark Regan',43,'Bristol'),(4,'Jason Hobson',30,'Bristol'),
  (5,'Tim Payne',29,'Wasps'),(6,'Andrew Sheridan',28,'Sale'),(7,'Matt Stevens',29,'Bath'),(8,'Phil Vickery',40,'Wasps'),(9,'Steve Borthwick',32,'Bath'),
  (10,'Louis Attaque',27,'Bath');
INSERT INTO shop VALUES (1,'FC Haka','Valkeakoski','Tehtaan kentta',3516,'Olli Huttunen'),(2,'HJK','Helsinki','Finnair Stadium',10770,'Antti Muurinen'),
  (3,'FC Honka','Espoo','Tapiolan Urheilupuisto',6000,'Mika Lehkosuo'),(4,'FC Inter','Turku','Veritas Stadion',10000,'Job Dragtsma'),
  (5,'FF Jaro','Jakobstad','Jakobstads Centralplan',5000,'Mika Laurikainen');
INSERT INTO hiring VALUES (1,1,'2009','T'),(1,2,'2003','T'),(4,3,'2011','F'),(2,4,'2012','T'),(5,5,'2013','T'),(2,6,'2010','F'),(4,7,'2008','T');
INSERT INTO evaluation VALUES (1,'2011',3000.0),(2,'2015',3200.0),(1,'2016',3000.0),(4,'2017',3200.0),(7,'2018',4000.0),(10,'2016',2900.0);
"#;

const WORLD_1: &str = r#"
CREATE TABLE country(Code TEXT PRIMARY KEY, Name TEXT, Continent TEXT, Region TEXT, SurfaceArea REAL, Population INTEGER, LifeExpectancy REAL);
CREATE TABLE city(ID INTEGER PRIMARY KEY, Name TEXT, CountryCode TEXT REFERENCES country(Code), District TEXT, Population INTEGER);
CREATE TABLE countrylanguage(CountryCode TEXT REFERENCES country(Code), Language TEXT, IsOfficial TEXT, Percentage REAL, PRIMARY KEY(CountryCode, Language));
INSERT INTO country VALUES ('ABW','Aruba','North America','Caribbean',193.0,103000,78.4),('AFG','Afghanistan','Asia','Southern and Central Asia',652090.0,22720000,45.9),
  ('CHN','China','Asia','Eastern Asia',9572900.0,1277558000,71.4),('FRA','France','Europe','Western Europe',551500.0,59225700,78.8),
  ('CAN','Canada','North America','North America',9970610.0,31147000,79.4),('JPN','Japan','Asia','Eastern Asia',377829.0,126714000,80.7),
  ('BEL','Belgium','Europe','Western Europe',30518.0,10239000,77.8);
INSERT INTO city VALUES (1,'Kabul','AFG','Kabol',1780000),(2,'Shanghai','CHN','Shanghai',9696300),(3,'Peking','CHN','Peking',7472000),
  (4,'Paris','FRA','Ile-de-France',2125246),(5,'Tokyo','JPN','Tokyo-to',7980230),(6,'Montreal','CAN','Quebec',1016376),(7,'Oranjestad','ABW','Aruba',29034),
  (8,'Brussels','BEL','Brussels',133859);
INSERT INTO countrylanguage VALUES ('ABW','Dutch','T',5.3),('ABW','English','F',9.5),('AFG','Pashtu','T',52.4),('AFG','Dari','T',32.1),('CHN','Chinese','T',92.0),
  ('FRA','French','T',93.6),('CAN','English','T',60.4),('CAN','French','T',23.4),('JPN','Japanese','T',99.1),('BEL','French','T',32.6),('BEL','Dutch','T',59.2),
  ('BEL','German','T',1.0);
"#;

const FLIGHT_2: &str = r#"
CREATE TABLE airlines(uid INTEGER PRIMARY KEY, Airline TEXT, Abbreviation TEXT, Country TEXT);
CREATE TABLE airports(City TEXT, AirportCode TEXT PRIMARY KEY, AirportName TEXT, Country TEXT, CountryAbbrev TEXT);
CREATE TABLE flights(Airline INTEGER REFERENCES airlines(uid), FlightNo INTEGER, SourceAirport TEXT REFERENCES airports(AirportCode),
  DestAirport TEXT REFERENCES airports(AirportCode), PRIMARY KEY(Airline, FlightNo));
INSERT INTO airlines VALUES (1,'United Airlines','UAL','USA'),(2,'US Airways','USAir','USA'),(3,'Delta Airlines','Delta','USA'),(4,'Southwest Airlines','SWA','USA'),
  (5,'Virgin America','VX','USA'),(6,'JetBlue Airways','JetBlue','USA'),(7,'Air Canada','ACA','Canada');
INSERT INTO airports VALUES ('Aberdeen','APG','Phillips AAF','United States','US'),('Aberdeen','ABR','Municipal','United States','US'),
  ('Abilene','DYS','Dyess AFB','United States','US'),('Abilene','ABI','Municipal','United States','US'),('Ada','ADT','Ada','United States','US'),
  ('Toronto','YYZ','Pearson','Canada','CA');
INSERT INTO flights VALUES (1,28,'APG','ABR'),(1,29,'ABR','APG'),(2,44,'APG','DYS'),(3,45,'DYS','ABI'),(3,54,'ABI','ADT'),(3,55,'ADT','APG'),
  (7,101,'YYZ','APG'),(5,90,'APG','ABI');
"#;

const CAR_1: &str = r#"
CREATE TABLE continents(ContId INTEGER PRIMARY KEY, Continent TEXT);
CREATE TABLE countries(CountryId INTEGER PRIMARY KEY, CountryName TEXT, Continent INTEGER REFERENCES continents(ContId));
CREATE TABLE car_makers(Id INTEGER PRIMARY KEY, Maker TEXT, FullName TEXT, Country INTEGER REFERENCES countries(CountryId));
CREATE TABLE cars_data(Id INTEGER PRIMARY KEY, MPG REAL, Cylinders INTEGER, Horsepower INTEGER, Weight INTEGER, Year INTEGER);
INSERT INTO continents VALUES (1,'america'),(2,'europe'),(3,'asia'),(4,'africa'),(5,'australia');
INSERT INTO countries VALUES (1,'usa',1),(2,'germany',2),(3,'france',2),(4,'japan',3),(5,'italy',2),(6,'sweden',2),(7,'uk',2),(8,'korea',3),
  (9,'russia',2),(10,'nigeria',4),(11,'australia',5),(12,'new zealand',5),(13,'egypt',4),(14,'mexico',1),(15,'brazil',1);
INSERT INTO car_makers VALUES (1,'amc','American Motor Company',1),(2,'volkswagen','Volkswagen',2),(3,'bmw','BMW',2),(4,'gm','General Motors',1),
  (5,'ford','Ford Motor Company',1),(6,'chrysler','Chrysler',1),(7,'citroen','Citroen',3),(8,'nissan','Nissan Motors',4),(9,'fiat','Fiat',5),
  (10,'honda','Honda',4),(11,'mazda','Mazda',4),(12,'daimler benz','Daimler Benz',2),(13,'opel','Opel',2),(14,'peugeaut','Peugeaut',3),
  (15,'renault','Renault',3),(16,'saab','Saab',6),(17,'subaru','Subaru',4),(18,'toyota','Toyota',4),(19,'triumph','Triumph',7),(20,'volvo','Volvo',6),
  (21,'kia','Kia Motors',8),(22,'hyundai','Hyundai',8);
INSERT INTO cars_data VALUES (1,18.0,8,130,3504,1970),(2,15.0,8,165,3693,1970),(3,18.0,8,150,3436,1970),(4,24.0,4,95,2372,1970),(5,27.0,4,88,2130,1971),
  (6,26.0,4,46,1835,1971),(7,25.0,4,87,2672,1972),(8,22.0,6,100,2962,1972),(9,31.0,4,65,1773,1973),(10,13.0,8,175,4100,1973);
"#;

const CAMPUS_BIG: &str = r#"
CREATE TABLE department(dept_id INTEGER PRIMARY KEY, dept_name TEXT, building TEXT, budget INTEGER);
CREATE TABLE instructor(instr_id INTEGER PRIMARY KEY, name TEXT, dept_id INTEGER REFERENCES department(dept_id), salary INTEGER);
CREATE TABLE course(course_id INTEGER PRIMARY KEY, title TEXT, dept_id INTEGER REFERENCES department(dept_id), credits INTEGER);
CREATE TABLE classroom(room_id INTEGER PRIMARY KEY, building TEXT, room_number TEXT, capacity INTEGER);
CREATE TABLE section(sec_id INTEGER PRIMARY KEY, course_id INTEGER REFERENCES course(course_id), semester TEXT, year INTEGER,
  room_id INTEGER REFERENCES classroom(room_id));
CREATE TABLE student_profile(student_id INTEGER PRIMARY KEY, first_name TEXT, last_name TEXT, birth_year INTEGER, gender TEXT, email TEXT, phone TEXT,
  street TEXT, city TEXT, state TEXT, zip TEXT, dept_id INTEGER REFERENCES department(dept_id), enroll_year INTEGER, gpa REAL);
CREATE TABLE takes(student_id INTEGER REFERENCES student_profile(student_id), sec_id INTEGER REFERENCES section(sec_id), grade TEXT,
  PRIMARY KEY(student_id, sec_id));
CREATE TABLE advisor(student_id INTEGER PRIMARY KEY REFERENCES student_profile(student_id), instr_id INTEGER REFERENCES instructor(instr_id));
CREATE TABLE prereq(course_id INTEGER REFERENCES course(course_id), prereq_id INTEGER REFERENCES course(course_id), PRIMARY KEY(course_id, prereq_id));
INSERT INTO department VALUES (1,'Biology','Watson',90000),(2,'Physics','Taylor',70000),(3,'History','Painter',50000),(4,'Comp. Sci.','Taylor',100000);
INSERT INTO instructor VALUES (10,'Srinivasan',4,65000),(11,'Wu',1,90000),(12,'Mozart',3,40000),(13,'Einstein',2,85000),(14,'El Said',3,60000),
  (15,'Gold',2,87000),(16,'Katz',4,75000),(17,'Crick',1,72000),(18,'Brandt',4,92000);
INSERT INTO course VALUES (100,'Genetics',1,4),(101,'Computational Biology',1,3),(102,'Intro to CS',4,4),(103,'Physical Principles',2,4),
  (104,'World History',3,3),(105,'Game Design',4,2);
INSERT INTO classroom VALUES (1,'Packard','101',500),(2,'Painter','514',10),(3,'Taylor','3128',70),(4,'Watson','100',30),(5,'Watson','120',50);
INSERT INTO section VALUES (1,100,'Summer',2017,4),(2,101,'Fall',2017,5),(3,102,'Fall',2017,1),(4,103,'Spring',2018,3),(5,104,'Spring',2018,2),
  (6,105,'Spring',2018,3);
INSERT INTO student_profile VALUES
  (1,'Ana','Zhang',2000,'F','ana@uni.edu','555-0101','1 Elm St','Springfield','IL','62701',1,2018,3.8),
  (2,'Ben','Shankar',1999,'M','ben@uni.edu','555-0102','2 Oak St','Springfield','IL','62702',4,2017,3.2),
  (3,'Cara','Brown',2001,'F','cara@uni.edu','555-0103','3 Pine St','Urbana','IL','61801',4,2019,3.9),
  (4,'Dev','Chavez',2000,'M','dev@uni.edu','555-0104','4 Ash St','Urbana','IL','61802',3,2018,2.7),
  (5,'Eli','Peltier',1998,'M','eli@uni.edu','555-0105','5 Birch St','Peoria','IL','61602',2,2016,3.6),
  (6,'Fay','Levy',2002,'F','fay@uni.edu','555-0106','6 Cedar St','Peoria','IL','61603',1,2020,3.1),
  (7,'Gus','Williams',2001,'M','gus@uni.edu','555-0107','7 Maple St','Chicago','IL','60601',2,2019,3.55);
INSERT INTO takes VALUES (1,1,'A'),(1,2,'A-'),(2,3,'B'),(3,3,'A'),(4,5,'B+'),(5,4,'A'),(6,2,'C'),(7,4,'B'),(6,1,'B');
INSERT INTO advisor VALUES (1,11),(2,16),(3,18),(4,12),(5,13),(6,17),(7,15);
INSERT INTO prereq VALUES (101,100),(105,102),(103,102);
"#;

const MUSIC_FESTIVAL: &str = r#"
CREATE TABLE artist(Artist_ID INTEGER PRIMARY KEY, Artist TEXT, Age INTEGER, Famous_Title TEXT, Famous_Release_date TEXT);
CREATE TABLE volume(Volume_ID INTEGER PRIMARY KEY, Volume_Issue TEXT, Issue_Date TEXT, Weeks_on_Top REAL, Song TEXT,
  Artist_ID INTEGER REFERENCES artist(Artist_ID));
CREATE TABLE music_festival(ID INTEGER PRIMARY KEY, Music_Festival TEXT, Date_of_ceremony TEXT, Category TEXT,
  Volume INTEGER REFERENCES volume(Volume_ID), Result TEXT);
CREATE TABLE artist_award(Singer_ID INTEGER, Award TEXT, Year INTEGER);
INSERT INTO artist VALUES (1,'Gorgoroth',34,'Bergen 1996','November 2007'),(2,'Ophiolatry',35,'Transmutation','January 21, 2008'),
  (3,'Triumfall',49,'Antithesis of All Flesh','June 15, 2009'),(4,'Bood of Kingu',22,'Oblivion','2009'),(5,'Black Flame',18,'Imperivm','June 23, 2008'),
  (6,'Tangorodrim',35,'Unholy Metal Way','2009'),(7,'Ophiolatry',22,'Antievangelistical Process','2009');
INSERT INTO volume VALUES (1,'45:14','27 December 1986',3.0,'The Way',1),(2,'45:15','24 January',1.0,'Everybody Have Fun Tonight',2),
  (3,'45:16','31 January',1.0,'Walk Like an Egyptian',1),(4,'46:5','9 August',1.0,'La Isla Bonita',4),(5,'46:6','16 August',2.0,'Looking for a New Love',5),
  (6,'46:9','6 September',3.0,'Everybody Wants to Rule',6);
INSERT INTO music_festival VALUES (1,'34th England Academy Prize','18 February 2011','Best Song',1,'Nominated'),
  (2,'34th Japan Academy Prize','18 February 2011','Best Lyrics',2,'Nominated'),(3,'34th European Academy Prize','18 February 2011','Best Song',3,'Awarded'),
  (4,'36th Japan Academy Prize','18 February 2011','Best Song',4,'Awarded'),(5,'34th USA Academy Prize','18 February 2011','Best Song',5,'Nominated'),
  (6,'40th USA Academy Prize','18 February 2011','Best Song',6,'Nominated');
INSERT INTO artist_award VALUES (1,'Gold Disc',2009),(3,'Platinum',2010),(5,'Newcomer',2008);
"#;

/// `(db_id, creation script)` for every fixture database.
pub const DATABASES: &[(&str, &str)] = &[
    ("concert_singer", CONCERT_SINGER),
    ("soccer_2", SOCCER_2),
    ("pets_1", PETS_1),
    ("bus_network", BUS_NETWORK),
    ("employee_hire_evaluation", EMPLOYEE_HIRE_EVALUATION),
    ("world_1", WORLD_1),
    ("flight_2", FLIGHT_2),
    ("car_1", CAR_1),
    ("campus_big", CAMPUS_BIG),
    ("music_festival", MUSIC_FESTIVAL),
];

/// `(sample_id, db_id, question, gold_sql)`
const SAMPLES: &[(&str, &str, &str, &str)] = &[
    ("cs_01", "concert_singer", "How many singers do we have?", "SELECT count(*) FROM singer"),
    ("cs_02", "concert_singer", "Show name, country, age for all singers ordered by age from the oldest to the youngest.",
        "SELECT Name, Country, Age FROM singer ORDER BY Age DESC"),
    ("cs_03", "concert_singer", "What is the average, minimum, and maximum age of all singers from France?",
        "SELECT avg(Age), min(Age), max(Age) FROM singer WHERE Country = 'France'"),
    ("cs_04", "concert_singer", "Show the stadium name and the number of concerts in each stadium.",
        "SELECT T2.Name, count(*) FROM concert AS T1 JOIN stadium AS T2 ON T1.Stadium_ID = T2.Stadium_ID GROUP BY T1.Stadium_ID"),
    ("cs_05", "concert_singer", "List the names of singers who performed in a concert in 2014.",
        "SELECT T2.Name FROM singer_in_concert AS T1 JOIN singer AS T2 ON T1.Singer_ID = T2.Singer_ID JOIN concert AS T3 ON T1.concert_ID = T3.concert_ID WHERE T3.Year = '2014'"),
    ("cs_06", "concert_singer", "Show names of stadiums that have no concert.",
        "SELECT Name FROM stadium WHERE Stadium_ID NOT IN (SELECT Stadium_ID FROM concert)"),
    ("sc_01", "soccer_2", "For each position, what is the minimum time students spent practicing?",
        "SELECT min(player.hs) ,   tryout.ppos FROM tryout JOIN player ON tryout.pid  =  player.pid GROUP BY tryout.ppos"),
    ("sc_02", "soccer_2", "How many students got accepted after the tryout?", "SELECT count(*) FROM tryout WHERE decision = 'yes'"),
    ("sc_03", "soccer_2", "What is the total enrollment of colleges in each state, ordered by state?",
        "SELECT state, sum(enr) FROM college GROUP BY state ORDER BY state"),
    ("sc_04", "soccer_2", "Find the names of players who received a yes decision.",
        "SELECT T1.pname FROM player AS T1 JOIN tryout AS T2 ON T1.pid = T2.pid WHERE T2.decision = 'yes'"),
    ("sc_05", "soccer_2", "Which colleges have an enrollment larger than the average?",
        "SELECT cname FROM college WHERE enr > (SELECT avg(enr) FROM college)"),
    ("pt_01", "pets_1", "How many pets are owned by students older than 20?",
        "SELECT count(*) FROM Student AS T1 JOIN Has_Pet AS T2 ON T1.StuID = T2.StuID WHERE T1.Age > 20"),
    ("pt_02", "pets_1", "Find the number of dog pets that are raised by female students.",
        "SELECT count(*) FROM Student AS T1 JOIN Has_Pet AS T2 ON T1.StuID = T2.StuID JOIN Pets AS T3 ON T2.PetID = T3.PetID WHERE T1.Sex = 'F' AND T3.PetType = 'dog'"),
    ("pt_03", "pets_1", "Find the maximum weight for each type of pet.", "SELECT max(weight), PetType FROM Pets GROUP BY PetType"),
    ("pt_04", "pets_1", "Find the first name of students who have no pets.",
        "SELECT Fname FROM Student EXCEPT SELECT T1.Fname FROM Student AS T1 JOIN Has_Pet AS T2 ON T1.StuID = T2.StuID"),
    ("pt_05", "pets_1", "What is the average age of pets of each type, sorted by type?",
        "SELECT PetType, avg(pet_age) FROM Pets GROUP BY PetType ORDER BY PetType"),
    ("bn_01", "bus_network", "Show the free text of every stop.", "SELECT \"free text\" FROM stops"),
    ("bn_02", "bus_network", "Which stops are on route/line A1?", "SELECT name FROM stops WHERE \"route/line\" = 'A1'"),
    ("bn_03", "bus_network", "How many stops are in each zone?", "SELECT zone, count(*) FROM stops GROUP BY zone"),
    ("bn_04", "bus_network", "Who operates the route/line serving the stop named Central?",
        "SELECT T2.operator FROM stops AS T1 JOIN routes AS T2 ON T1.\"route/line\" = T2.\"route/line\" WHERE T1.name = 'Central'"),
    ("bn_05", "bus_network", "What is the free text of stop 3?", "SELECT \"free text\" FROM stops WHERE stop_id = 3"),
    ("eh_01", "employee_hire_evaluation", "How many employees are there?", "SELECT count(*) FROM employee"),
    ("eh_02", "employee_hire_evaluation", "Find the cities that have more than one employee under age 30.",
        "SELECT City FROM employee WHERE Age < 30 GROUP BY City HAVING count(*) > 1"),
    ("eh_03", "employee_hire_evaluation", "Find the name of the employee who got the highest one time bonus.",
        "SELECT T1.Name FROM employee AS T1 JOIN evaluation AS T2 ON T1.Employee_ID = T2.Employee_ID ORDER BY T2.Bonus DESC LIMIT 1"),
    ("eh_04", "employee_hire_evaluation", "Which shops have more products than the average shop?",
        "SELECT Name FROM shop WHERE Number_products > (SELECT avg(Number_products) FROM shop)"),
    ("eh_05", "employee_hire_evaluation", "How many full time employees were hired by each shop, by shop name?",
        "SELECT T2.Name, count(*) FROM hiring AS T1 JOIN shop AS T2 ON T1.Shop_ID = T2.Shop_ID WHERE T1.Is_full_time = 'T' GROUP BY T2.Name"),
    ("wd_01", "world_1", "What is the total population of countries in Asia?", "SELECT sum(Population) FROM country WHERE Continent = 'Asia'"),
    ("wd_02", "world_1", "Which cities have a population over five million, largest first?",
        "SELECT Name FROM city WHERE Population > 5000000 ORDER BY Population DESC"),
    ("wd_03", "world_1", "How many official languages does each country have?",
        "SELECT T1.Name, count(*) FROM country AS T1 JOIN countrylanguage AS T2 ON T1.Code = T2.CountryCode WHERE T2.IsOfficial = 'T' GROUP BY T1.Name"),
    ("wd_04", "world_1", "What is the average life expectancy in each continent?",
        "SELECT Continent, avg(LifeExpectancy) FROM country GROUP BY Continent"),
    ("wd_05", "world_1", "Which countries speak both English and French?",
        "SELECT T1.Name FROM country AS T1 JOIN countrylanguage AS T2 ON T1.Code = T2.CountryCode WHERE T2.Language = 'English' INTERSECT SELECT T1.Name FROM country AS T1 JOIN countrylanguage AS T2 ON T1.Code = T2.CountryCode WHERE T2.Language = 'French'"),
    ("fl_01", "flight_2", "How many flights depart from APG?", "SELECT count(*) FROM flights WHERE SourceAirport = 'APG'"),
    ("fl_02", "flight_2", "Which airline has the abbreviation UAL?", "SELECT Airline FROM airlines WHERE Abbreviation = 'UAL'"),
    ("fl_03", "flight_2", "List the distinct cities that have airports in alphabetical order.", "SELECT DISTINCT City FROM airports ORDER BY City"),
    ("fl_04", "flight_2", "How many airlines are from the USA?", "SELECT count(*) FROM airlines WHERE Country = 'USA'"),
    ("fl_05", "flight_2", "Which airline operates the most flights?",
        "SELECT T1.Airline FROM airlines AS T1 JOIN flights AS T2 ON T1.uid = T2.Airline GROUP BY T1.Airline ORDER BY count(*) DESC LIMIT 1"),
    ("cr_01", "car_1", "How many car makers are there?", "SELECT count(*) FROM car_makers"),
    ("cr_02", "car_1", "What is the average horsepower of cars with 4 cylinders?", "SELECT avg(Horsepower) FROM cars_data WHERE Cylinders = 4"),
    ("cr_03", "car_1", "Which countries have more than two car makers?",
        "SELECT T1.CountryName FROM countries AS T1 JOIN car_makers AS T2 ON T1.CountryId = T2.Country GROUP BY T1.CountryId HAVING count(*) > 2"),
    ("cr_04", "car_1", "How many model years have a best MPG above 20?",
        "SELECT count(*) FROM (SELECT Year FROM cars_data GROUP BY Year HAVING max(MPG) > 20)"),
    ("cr_05", "car_1", "How many countries are in each continent?",
        "SELECT T1.Continent, count(*) FROM continents AS T1 JOIN countries AS T2 ON T1.ContId = T2.Continent GROUP BY T1.ContId"),
    ("cb_01", "campus_big", "How many students are in each department, by department name?",
        "SELECT T1.dept_name, count(*) FROM department AS T1 JOIN student_profile AS T2 ON T1.dept_id = T2.dept_id GROUP BY T1.dept_name"),
    ("cb_02", "campus_big", "Which students have a GPA above 3.5, best first?",
        "WITH honors AS (SELECT first_name, last_name, gpa FROM student_profile WHERE gpa > 3.5) SELECT first_name, last_name FROM honors ORDER BY gpa DESC"),
    ("cb_03", "campus_big", "Which instructors earn more than every instructor in the Physics department?",
        "SELECT name FROM instructor WHERE salary > (SELECT max(T1.salary) FROM instructor AS T1 JOIN department AS T2 ON T1.dept_id = T2.dept_id WHERE T2.dept_name = 'Physics')"),
    ("cb_04", "campus_big", "Show the name, birth year, gender, email, phone, street, city, state, zip, enrollment year and GPA of every student.",
        "SELECT first_name, last_name, birth_year, gender, email, phone, street, city, state, zip, enroll_year, gpa FROM student_profile"),
    ("cb_05", "campus_big", "Which classroom numbers host sections worth at least 3 credits taken by students advised by Biology instructors?",
        "SELECT DISTINCT T5.room_number FROM department AS T1 JOIN instructor AS T2 ON T1.dept_id = T2.dept_id JOIN advisor AS T3 ON T2.instr_id = T3.instr_id JOIN takes AS T4 ON T3.student_id = T4.student_id JOIN section AS T6 ON T4.sec_id = T6.sec_id JOIN classroom AS T5 ON T6.room_id = T5.room_id JOIN course AS T7 ON T6.course_id = T7.course_id WHERE T1.dept_name = 'Biology' AND T7.credits >= 3"),
    ("mf_01", "music_festival", "How many artists are there?", "SELECT count(*) FROM artist"),
    ("mf_02", "music_festival", "What are the songs in volumes that stayed on top for more than 1 week?", "SELECT Song FROM volume WHERE Weeks_on_Top > 1"),
    ("mf_03", "music_festival", "What is the most common result of the music festival?",
        "SELECT Result FROM music_festival GROUP BY Result ORDER BY count(*) DESC LIMIT 1"),
    ("mf_04", "music_festival", "Show the famous titles of artists with a volume on top for more than 2 weeks.",
        "SELECT T1.Famous_Title FROM artist AS T1 JOIN volume AS T2 ON T1.Artist_ID = T2.Artist_ID WHERE T2.Weeks_on_Top > 2"),
];

/// The fixture samples without attached schemas.
pub fn fixture_samples() -> Vec<Sample> {
    SAMPLES
        .iter()
        .map(|(id, db, q, sql)| Sample {
            sample_id: id.to_string(),
            db_id: db.to_string(),
            question: q.to_string(),
            gold_sql: sql.to_string(),
            schema_tables: Vec::new(),
        })
        .collect()
}

/// Build the corpus under `root`: `database/`, `variants/` and `samples.jsonl`.
/// Existing fixture files are replaced.
pub fn build_fixture_corpus(root: &Path) -> Result<FixtureCorpus, FixtureError> {
    let variant_root = root.join("variants");
    for (db_id, script) in DATABASES {
        let path = database_path(root, db_id);
        create_database(&path, db_id, script)?;
        let schema = introspect_database(&path, db_id, 0)?;
        for k in 1..=VARIANTS_PER_DB {
            let out = variant_root.join(db_id).join(format!("{k}.sqlite"));
            write_variant(&path, &out, &schema, k)?;
        }
    }
    let samples = fixture_samples();
    let samples_path = root.join("samples.jsonl");
    write_jsonl(&samples_path, &samples)?;
    Ok(FixtureCorpus { root: root.to_path_buf(), samples_path, variant_root, samples })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> FixtureError + '_ {
    move |e| FixtureError::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn fresh_file(path: &Path) -> Result<(), FixtureError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    if path.exists() {
        fs::remove_file(path).map_err(io_err(path))?;
    }
    Ok(())
}

fn create_database(path: &Path, db_id: &str, script: &str) -> Result<(), FixtureError> {
    fresh_file(path)?;
    let sqlite = |e: rusqlite::Error| FixtureError::Sqlite { db_id: db_id.to_string(), message: e.to_string() };
    let conn = Connection::open(path).map_err(sqlite)?;
    conn.execute_batch("PRAGMA foreign_keys = OFF").map_err(sqlite)?;
    conn.execute_batch(script).map_err(sqlite)
}

/// Copy `base` with rows reversed, some rows dropped, and non-key numeric
/// columns shifted, so that semantically wrong queries tend to diverge.
fn write_variant(base: &Path, out: &Path, schema: &DatabaseSchema, k: usize) -> Result<(), FixtureError> {
    fresh_file(out)?;
    let sqlite = |e: rusqlite::Error| FixtureError::Sqlite { db_id: schema.db_id.clone(), message: e.to_string() };
    let src = Connection::open_with_flags(base, OpenFlags::SQLITE_OPEN_READ_ONLY).map_err(sqlite)?;
    let mut dst = Connection::open(out).map_err(sqlite)?;
    dst.execute_batch("PRAGMA foreign_keys = OFF").map_err(sqlite)?;

    let ddl: Vec<String> = src
        .prepare("SELECT sql FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid")
        .and_then(|mut s| s.query_map([], |r| r.get(0))?.collect())
        .map_err(sqlite)?;
    let tx = dst.transaction().map_err(sqlite)?;
    for stmt in &ddl {
        tx.execute_batch(stmt).map_err(sqlite)?;
    }
    for table in &schema.tables {
        let keys = schema.key_columns_of(std::slice::from_ref(table));
        let perturb: Vec<bool> = table.columns.iter().map(|c| !keys.iter().any(|key| key.eq_ignore_ascii_case(&c.name))).collect();
        let quoted = format!("\"{}\"", table.name.replace('"', "\"\""));
        let mut rows: Vec<Vec<Value>> = src
            .prepare(&format!("SELECT * FROM {quoted} ORDER BY rowid DESC"))
            .and_then(|mut s| {
                let width = s.column_count();
                s.query_map([], |r| (0..width).map(|i| r.get::<_, Value>(i)).collect())?.collect()
            })
            .map_err(sqlite)?;
        if rows.len() > 3 {
            let mut i = 0;
            rows.retain(|_| {
                i += 1;
                !(i + k).is_multiple_of(4)
            });
        }
        let placeholders = vec!["?"; table.columns.len()].join(", ");
        let mut insert = tx.prepare(&format!("INSERT INTO {quoted} VALUES ({placeholders})")).map_err(sqlite)?;
        for row in rows {
            let row = row.into_iter().zip(&perturb).map(|(v, &p)| if p { shift(v, k) } else { v });
            insert.execute(params_from_iter(row)).map_err(sqlite)?;
        }
    }
    tx.commit().map_err(sqlite)
}

fn shift(v: Value, k: usize) -> Value {
    match v {
        Value::Integer(i) => Value::Integer(i + k as i64),
        Value::Real(r) => Value::Real(r * (1.0 + 0.05 * k as f64)),
        other => other,
    }
}
